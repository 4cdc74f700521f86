//! Handcrafted-feature logistic regression next to an untrained model, with
//! a per-bag CSV report.

use homnet::eval::{lr_baseline, pair_features, BaselineConfig, EvalReport, FeatureConfig, DEFAULT_THRESHOLD};
use homnet::model::{init_params, ModelConfig};
use homnet::synth::{build_pretrain_corpus, make_templates, CorpusConfig};
use homnet::train::evaluate_bags;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 256;
    let corpus_cfg = CorpusConfig {
        n_bags: 1000,
        n_subjects: 200,
        d,
        val_fraction: 0.2,
        ..CorpusConfig::default()
    };
    let corpus = build_pretrain_corpus(&make_templates(corpus_cfg.template_seed), &corpus_cfg, 5)?;

    let features = pair_features(&corpus.val[0].pairs[0], &FeatureConfig::default())?;
    println!("first pair features: {:?}", features.to_vec());

    let lr = lr_baseline(&corpus.train, &corpus.val, &BaselineConfig::default())?;
    println!("LR baseline: AUC {:.3}, F1 {:.3}, {:?}", lr.auc, lr.f1, lr.confusion);

    let cfg = ModelConfig {
        d,
        ..ModelConfig::default()
    };
    let state = init_params(&cfg, 0)?.cast::<f32>();
    let untrained = EvalReport::new(evaluate_bags(&state, &cfg, &corpus.val)?, DEFAULT_THRESHOLD)?;
    println!("untrained model: AUC {:.3}", untrained.auc);

    let path = std::env::temp_dir().join("homnet_baseline.csv");
    lr.save_csv(&path)?;
    println!("per-bag scores written to {}", path.display());
    Ok(())
}

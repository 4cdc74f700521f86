//! Self-supervised pretraining on a small synthetic corpus.
//!
//! Usage: `cargo run --release --example pretrain_desk -- [epochs]`

use homnet::eval::{auc_roc, f1, DEFAULT_THRESHOLD};
use homnet::model::ModelConfig;
use homnet::synth::{build_pretrain_corpus, make_templates, CorpusConfig};
use homnet::train::{evaluate_bags, pretrain, save_checkpoint, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let epochs = std::env::args().nth(1).map_or(Ok(6), |s| s.parse())?;

    let d = 128;
    let corpus_cfg = CorpusConfig {
        n_bags: 1200,
        n_subjects: 300,
        d,
        val_fraction: 0.2,
        ..CorpusConfig::default()
    };
    let corpus = build_pretrain_corpus(&make_templates(corpus_cfg.template_seed), &corpus_cfg, 1)?;
    let cfg = ModelConfig {
        d,
        ..ModelConfig::default()
    };
    let tcfg = TrainConfig {
        lr: 3e-4,
        batch_size: 64,
        max_epochs: epochs,
        seed: 1,
        ..TrainConfig::pretrain()
    };
    let outcome = pretrain(&corpus.train, &corpus.val, &cfg, &tcfg)?;

    let ckpt = &outcome.checkpoint;
    let scores = evaluate_bags(&ckpt.state, &ckpt.config, &corpus.val)?;
    let s: Vec<f64> = scores.iter().map(|r| r.score).collect();
    let l: Vec<u8> = scores.iter().map(|r| r.label).collect();
    println!(
        "best epoch {}: val AUC {:.3}, F1 {:.3}",
        ckpt.metadata.epoch,
        auc_roc(&s, &l)?,
        f1(&s, &l, DEFAULT_THRESHOLD)?
    );

    let path = std::env::temp_dir().join("homnet_desk.ckpt");
    save_checkpoint(ckpt, &path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}

//! Adapts a checkpoint to one site with the region extractor and the first
//! alignment layer frozen.

use homnet::model::{init_params, ModelConfig};
use homnet::synth::{build_pretrain_corpus, make_templates, CorpusConfig};
use homnet::train::{finetune, Checkpoint, CheckpointMeta, TrainConfig, DEFAULT_FREEZE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 128;
    let cfg = ModelConfig {
        d,
        ..ModelConfig::default()
    };
    // A fresh model stands in for a pretrained checkpoint.
    let start = Checkpoint::new(cfg.clone(), &init_params(&cfg, 3)?, None, CheckpointMeta::default());

    let site_cfg = CorpusConfig {
        n_bags: 300,
        n_subjects: 60,
        d,
        val_fraction: 0.0,
        ..CorpusConfig::default()
    };
    let site = build_pretrain_corpus(&make_templates(site_cfg.template_seed), &site_cfg, 9)?.train;

    let tcfg = TrainConfig {
        batch_size: 8,
        max_epochs: 3,
        lr: 1e-4,
        ..TrainConfig::finetune()
    };
    let out = finetune(&start, &site, &tcfg)?;
    println!(
        "site split: {} train / {} val / {} test bags",
        out.split.train.len(),
        out.split.val.len(),
        out.split.test.len()
    );
    for log in &out.outcome.history {
        println!("epoch {}: train loss {:.4}, val auc {:?}", log.epoch, log.train_loss, log.val_auc);
    }

    let after = &out.outcome.checkpoint;
    for (name, before) in start.state.iter() {
        let frozen = DEFAULT_FREEZE.iter().any(|p| name.starts_with(p));
        let changed = before != after.state.get(name).expect("same tensor names");
        if frozen || changed {
            println!("{:<32} frozen={frozen:<5} changed={changed}", name);
        }
    }
    Ok(())
}

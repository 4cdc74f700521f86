//! Single-precision inference on one bag: probability, pair weights and the
//! alignment map of the first head.
//!
//! Usage: `cargo run --release --example predict_bag -- [checkpoint]`

use std::time::Instant;

use homnet::model::{attention_maps, init_params, predict_bag, ModelConfig, ModelState};
use homnet::synth::{build_pretrain_corpus, make_templates, CorpusConfig};
use homnet::train::load_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (cfg, state): (ModelConfig, ModelState<f32>) = match std::env::args().nth(1) {
        Some(path) => {
            let ckpt = load_checkpoint(path.as_ref())?;
            (ckpt.config, ckpt.state)
        }
        None => {
            let cfg = ModelConfig::default();
            let state = init_params(&cfg, 0)?.cast();
            (cfg, state)
        }
    };
    let corpus_cfg = CorpusConfig {
        n_bags: 4,
        n_subjects: 4,
        d: cfg.d,
        m: cfg.m,
        val_fraction: 0.0,
        abnormal_ratio: 0.5,
        ..CorpusConfig::default()
    };
    let bags = build_pretrain_corpus(&make_templates(corpus_cfg.template_seed), &corpus_cfg, 3)?.train;

    for bag in &bags {
        let t = Instant::now();
        let pred = predict_bag(bag, &state, &cfg)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        let alphas: Vec<String> = pred.alphas.iter().map(|a| format!("{a:.3}")).collect();
        println!(
            "{} (label {}): y_hat {:.4}, alphas [{}], {ms:.1} ms",
            bag.record_id,
            bag.label,
            pred.y_hat,
            alphas.join(", ")
        );
    }

    let maps = attention_maps(&bags[0], &state, &cfg)?;
    let n_r = cfg.n_r();
    println!("layer 0, chromosome a_1, head 0:");
    for row in maps[0].data()[..n_r * n_r].chunks(n_r) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        println!("  {}", cells.join(" "));
    }
    Ok(())
}

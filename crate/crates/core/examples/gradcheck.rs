//! Compares reverse-mode gradients of the full model against central
//! differences.
//!
//! Usage: `cargo run --release --example gradcheck -- [softmax|raw_eps]`

use homnet::model::{gradcheck_config, run_gradcheck, AttnNorm, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let norm = match std::env::args().nth(1).as_deref() {
        Some("raw_eps") => AttnNorm::RawEps,
        _ => AttnNorm::Softmax,
    };
    let cfg = ModelConfig {
        attn_norm: norm,
        ..gradcheck_config()
    };
    // Near-zero row sums make the raw normalization strongly curved, so it
    // needs a smaller step.
    let h = if norm == AttnNorm::RawEps { 1e-7 } else { 1e-5 };
    let t = std::time::Instant::now();
    let report = run_gradcheck(&cfg, 0, h, 1e-4)?;
    println!(
        "{norm:?}: checked {} elements ({} skipped at kinks), max rel err {:.2e}, {:.1} s",
        report.checked,
        report.excluded,
        report.max_rel_err,
        t.elapsed().as_secs_f64()
    );
    for f in report.failures.iter().take(5) {
        println!("  param {} element {}: analytic {:e} numeric {:e}", f.param, f.element, f.analytic, f.numeric);
    }
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}

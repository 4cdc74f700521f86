//! Finite-difference check of the full bag loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{forward_bag, init_params, BoundParams, ModelConfig, ModelError, ModelState};
use crate::data::{BagRecord, BandLevel, ChromosomePair, ChromosomeSequence};
use crate::numerics::{grad_check, GradCheckReport, Tensor};

/// A bag of random intensities shaped for `cfg`, for gradient probing.
pub fn probe_bag(cfg: &ModelConfig, seed: u64, label: u8) -> BagRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seq = |rng: &mut ChaCha8Rng| {
        let valid = rng.gen_range(cfg.d / 2..=cfg.d);
        let mut row = || -> Vec<f32> {
            (0..cfg.d)
                .map(|i| if i < valid { rng.gen_range(0.0..1.0) } else { 0.0 })
                .collect()
        };
        let (left, right) = (row(), row());
        ChromosomeSequence::from_rows(left, right, valid).expect("values in range")
    };
    let pairs = (0..cfg.m)
        .map(|_| {
            let a = seq(&mut rng);
            let b = seq(&mut rng);
            ChromosomePair::new(a, b).expect("same d")
        })
        .collect();
    BagRecord {
        record_id: format!("probe{seed}"),
        subject_id: "probe".into(),
        chrom_type: (seed % 24) as usize,
        band_level: BandLevel::ALL[(seed % 4) as usize],
        label,
        pairs,
    }
}

/// Checks reverse-mode gradients of the bag loss against central
/// differences for every parameter element.
pub fn check_model_gradients(
    cfg: &ModelConfig,
    state: &ModelState<f64>,
    record: &BagRecord,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport, ModelError> {
    let names: Vec<String> = state.names().map(String::from).collect();
    let params: Vec<Tensor<f64>> = state.iter().map(|(_, t)| t.clone()).collect();
    grad_check(
        |g, ids| {
            let p = BoundParams::from_ids(names.iter().map(String::as_str), ids);
            let out = forward_bag(g, &p, record, cfg, None)?;
            Ok(g.bce(out.y_hat, f64::from(record.label))?)
        },
        &params,
        h,
        tol,
    )
}

/// The small configuration used for routine gradient checks.
pub fn gradcheck_config() -> ModelConfig {
    ModelConfig {
        d: 64,
        k_mg: 8,
        l_r: 8,
        n_h: 2,
        hom_layers: 2,
        m: 2,
        ..ModelConfig::default()
    }
}

/// Gradient check of a freshly initialized model on a probe bag.
pub fn run_gradcheck(cfg: &ModelConfig, seed: u64, h: f64, tol: f64) -> Result<GradCheckReport, ModelError> {
    let state = init_params(cfg, seed)?;
    let record = probe_bag(cfg, seed.wrapping_add(1), 1);
    check_model_gradients(cfg, &state, &record, h, tol)
}

//! The network: region extraction per chromosome, homologous alignment per
//! pair, and weighted pooling per bag.

mod config;
mod forward;
mod gradcheck;
mod state;

use crate::data::{BagRecord, ChromosomeSequence, ConditionEncoding, CONDITION_WIDTH};
use crate::numerics::{bce_value, Element, Graph, NumericsError, Tensor};

pub use config::{AttnNorm, ModelConfig, RAW_NORM_EPS};
pub use forward::{
    bag_block, cms_block, condition_tensor, forward_bag, hom_block, stack_sequences, BagNodes, BoundParams,
};
pub use gradcheck::{check_model_gradients, gradcheck_config, probe_bag, run_gradcheck};
pub use state::{head_param, init_params, layer_param, param_specs, ModelState, ParamKind, ParamSpec};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("model state does not match config: {0}")]
    StateMismatch(String),
    #[error("invalid model input: {0}")]
    InvalidInput(String),
    #[error("a bag needs at least one pair")]
    EmptyBag,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `H'` of one pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDifference(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prediction {
    pub y_hat: f64,
    pub alphas: Vec<f64>,
}

fn to_f64<T: Element>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.to_f64().expect("finite")).collect()
}

fn check_regions(r: &Tensor<f64>, cfg: &ModelConfig) -> Result<(), ModelError> {
    if r.shape() != [cfg.n_r(), cfg.l_r] {
        return Err(NumericsError::ShapeMismatch(format!(
            "regions {:?}, expected [{}, {}]",
            r.shape(),
            cfg.n_r(),
            cfg.l_r
        ))
        .into());
    }
    Ok(())
}

/// Region representations `(n_r, l_r)` of a single chromosome.
pub fn cms_forward(
    seq: &ChromosomeSequence,
    cond: &ConditionEncoding,
    state: &ModelState<f64>,
    cfg: &ModelConfig,
) -> Result<Tensor<f64>, ModelError> {
    cfg.validate()?;
    if seq.d() != cfg.d {
        return Err(NumericsError::ShapeMismatch(format!("sequence d = {}, expected {}", seq.d(), cfg.d)).into());
    }
    let mut g = Graph::new();
    let p = BoundParams::bind(&mut g, state)?;
    let x = Tensor::new(
        vec![1, 1, 2, cfg.d],
        seq.values().iter().map(|v| f64::from(*v)).collect(),
    )?;
    let x = g.constant(x)?;
    let c = g.constant(Tensor::new(vec![1, CONDITION_WIDTH], cond.concat())?)?;
    let r = cms_block(&mut g, &p, x, c, cfg)?;
    Ok(g.value(r).clone())
}

/// Pair difference from the region representations of both homologs.
pub fn hom_align(
    ra: &Tensor<f64>,
    rb: &Tensor<f64>,
    state: &ModelState<f64>,
    cfg: &ModelConfig,
) -> Result<PairDifference, ModelError> {
    cfg.validate()?;
    check_regions(ra, cfg)?;
    check_regions(rb, cfg)?;
    let mut g = Graph::new();
    let p = BoundParams::bind(&mut g, state)?;
    let a = g.constant(ra.clone())?;
    let b = g.constant(rb.clone())?;
    let x = g.concat_rows(&[a, b])?;
    let h = hom_block(&mut g, &p, x, 1, cfg, &mut Vec::new())?;
    Ok(PairDifference(to_f64(g.value(h))))
}

/// Weighted pooling of pair differences into a bag prediction.
pub fn bag_forward(
    diffs: &[PairDifference],
    state: &ModelState<f64>,
    cfg: &ModelConfig,
) -> Result<Prediction, ModelError> {
    if diffs.is_empty() {
        return Err(ModelError::EmptyBag);
    }
    if let Some(bad) = diffs.iter().find(|d| d.0.len() != cfg.l_h) {
        return Err(NumericsError::ShapeMismatch(format!("difference of width {}, expected {}", bad.0.len(), cfg.l_h)).into());
    }
    let mut g = Graph::new();
    let p = BoundParams::bind(&mut g, state)?;
    let h = Tensor::new(
        vec![diffs.len(), cfg.l_h],
        diffs.iter().flat_map(|d| d.0.iter().copied()).collect(),
    )?;
    let h = g.constant(h)?;
    let (y, alphas) = bag_block(&mut g, &p, h)?;
    Ok(Prediction {
        y_hat: g.value(y).data()[0],
        alphas: g.value(alphas).data().to_vec(),
    })
}

/// Binary cross-entropy with the prediction clamped away from 0 and 1.
pub fn bce_loss(y_hat: f64, y: u8) -> f64 {
    bce_value(y_hat, f64::from(y)).0
}

/// End-to-end prediction for one bag, in the precision of `state`.
pub fn predict_bag<T: Element>(
    record: &BagRecord,
    state: &ModelState<T>,
    cfg: &ModelConfig,
) -> Result<Prediction, ModelError> {
    let mut g = Graph::new();
    let p = BoundParams::bind(&mut g, state)?;
    let out = forward_bag(&mut g, &p, record, cfg, None)?;
    Ok(Prediction {
        y_hat: to_f64(g.value(out.y_hat))[0],
        alphas: to_f64(g.value(out.alphas)),
    })
}

/// Alignment weights of one bag, per layer, each `(2m·n_h, n_r, n_r)`;
/// block `c·n_h + h` belongs to chromosome `c` (`a_1..a_m, b_1..b_m`) and head `h`.
pub fn attention_maps<T: Element>(
    record: &BagRecord,
    state: &ModelState<T>,
    cfg: &ModelConfig,
) -> Result<Vec<Tensor<T>>, ModelError> {
    let mut g = Graph::new();
    let p = BoundParams::bind(&mut g, state)?;
    let out = forward_bag(&mut g, &p, record, cfg, None)?;
    Ok(out.attention.iter().map(|id| g.value(*id).clone()).collect())
}

#[cfg(test)]
mod tests;

//! The three blocks, written once over [`Graph`] so the same code serves
//! `f64` training and `f32` inference.
//!
//! A bag's `2m` chromosomes are stacked as `[a_1..a_m, b_1..b_m]`, each
//! contributing `n_r` rows of width `l_r`. Swapping the two halves gives
//! every chromosome its homolog in the same row position.

use std::collections::BTreeMap;

use super::config::{AttnNorm, RAW_NORM_EPS};
use super::state::{head_param, layer_param};
use super::{ModelConfig, ModelError, ModelState};
use crate::data::{BagRecord, CONDITION_WIDTH};
use crate::numerics::{Element, Graph, NodeId, Tensor};

/// Parameter leaves of one graph, by tensor name.
pub struct BoundParams {
    ids: BTreeMap<String, NodeId>,
}

impl BoundParams {
    pub fn bind<'p, T: Element>(g: &mut Graph<'p, T>, state: &'p ModelState<T>) -> Result<Self, ModelError> {
        let mut ids = BTreeMap::new();
        for (name, t) in state.iter() {
            ids.insert(name.to_string(), g.param(t)?);
        }
        Ok(Self { ids })
    }

    /// Pairs already-created leaves with their tensor names.
    pub fn from_ids<'a>(names: impl IntoIterator<Item = &'a str>, ids: &[NodeId]) -> Self {
        Self {
            ids: names.into_iter().map(String::from).zip(ids.iter().copied()).collect(),
        }
    }

    pub fn id(&self, name: &str) -> Result<NodeId, ModelError> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::StateMismatch(format!("unknown tensor {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.ids.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Node handles of one bag's forward pass.
pub struct BagNodes {
    /// `(1,1)` abnormality probability.
    pub y_hat: NodeId,
    /// `(m,1)` pair weights.
    pub alphas: NodeId,
    /// `(m, l_h)` pair-difference representations.
    pub diffs: NodeId,
    /// Alignment weights per layer, each `(2m·n_h, n_r, n_r)` with the head
    /// index varying fastest.
    pub attention: Vec<NodeId>,
}

/// Stacks a bag's sequences as `(2m, 1, 2, d)`; `swap[i]` exchanges pair `i`.
pub fn stack_sequences<T: Element>(
    record: &BagRecord,
    cfg: &ModelConfig,
    swap: Option<&[bool]>,
) -> Result<Tensor<T>, ModelError> {
    let m = record.m();
    if m == 0 {
        return Err(ModelError::InvalidInput("bag has no pairs".into()));
    }
    if record.d() != Some(cfg.d) {
        return Err(ModelError::InvalidInput(format!(
            "bag sequences have d = {:?}, model expects {}",
            record.d(),
            cfg.d
        )));
    }
    let block = 2 * cfg.d;
    let mut data = vec![T::zero(); 2 * m * block];
    for (i, pair) in record.pairs.iter().enumerate() {
        let flip = swap.is_some_and(|s| s.get(i).copied().unwrap_or(false));
        let (a, b) = if flip { (&pair.b, &pair.a) } else { (&pair.a, &pair.b) };
        for (dst, v) in data[i * block..(i + 1) * block].iter_mut().zip(a.values()) {
            *dst = T::from_f64(f64::from(*v));
        }
        if !cfg.single_chromosome {
            let at = (m + i) * block;
            for (dst, v) in data[at..at + block].iter_mut().zip(b.values()) {
                *dst = T::from_f64(f64::from(*v));
            }
        }
    }
    Ok(Tensor::new(vec![2 * m, 1, 2, cfg.d], data)?)
}

pub fn condition_tensor<T: Element>(record: &BagRecord) -> Tensor<T> {
    let c = record.condition().concat();
    Tensor::from_fn(&[1, CONDITION_WIDTH], |i| T::from_f64(c[i]))
}

/// Region representations for a `(batch, 1, 2, d)` stack: `(batch·n_r, l_r)`.
pub fn cms_block<T: Element>(
    g: &mut Graph<'_, T>,
    p: &BoundParams,
    seqs: NodeId,
    cond: NodeId,
    cfg: &ModelConfig,
) -> Result<NodeId, ModelError> {
    let batch = g.value(seqs).shape()[0];
    let (n_r, l_r) = (cfg.n_r(), cfg.l_r);

    let conv = g.conv2d_strided(seqs, p.id("cms.merge_kernels")?, (2, cfg.k_mg))?;
    let conv = g.reshape(conv, &[batch, l_r, n_r])?;
    let r = g.transpose_blocks(conv, batch, l_r, n_r)?;
    let r = g.reshape(r, &[batch * n_r, l_r])?;
    let info = g.matmul(cond, p.id("cms.W_info")?)?;
    let info = g.reshape(info, &[n_r, l_r])?;
    let r = g.add_tiled(r, info)?;

    // Mix features within each region.
    let h = g.matmul(r, p.id("cms.W_R1")?)?;
    let h = g.relu(h)?;
    let h = g.matmul(h, p.id("cms.W_R2")?)?;
    let r1 = g.add(h, r)?;

    // Mix regions within each feature.
    let t = g.transpose_blocks(r1, batch, n_r, l_r)?;
    let t = g.reshape(t, &[batch * l_r, n_r])?;
    let h = g.matmul(t, p.id("cms.W_R3")?)?;
    let h = g.relu(h)?;
    let h = g.matmul(h, p.id("cms.W_R4")?)?;
    let h = g.transpose_blocks(h, batch, l_r, n_r)?;
    let h = g.reshape(h, &[batch * n_r, l_r])?;
    Ok(g.add(h, r1)?)
}

fn swap_halves<T: Element>(g: &mut Graph<'_, T>, x: NodeId, half: usize) -> Result<NodeId, ModelError> {
    let first = g.slice_rows(x, 0, half)?;
    let second = g.slice_rows(x, half, 2 * half)?;
    Ok(g.concat_rows(&[second, first])?)
}

/// Per-head projection matrices of one layer, side by side: `(l_r, n_h·d_a)`.
fn fused_heads<T: Element>(
    g: &mut Graph<'_, T>,
    p: &BoundParams,
    layer: usize,
    which: &str,
    n_h: usize,
) -> Result<NodeId, ModelError> {
    let parts = (0..n_h)
        .map(|head| p.id(&head_param(layer, head, which)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(g.concat_cols(&parts)?)
}

/// One alignment layer over the stacked `(2m·n_r, l_r)` regions. All heads
/// are projected at once and split into a `(2m·n_h, n_r, d_a)` batch.
fn hom_layer<T: Element>(
    g: &mut Graph<'_, T>,
    p: &BoundParams,
    x: NodeId,
    layer: usize,
    m: usize,
    cfg: &ModelConfig,
    attention: &mut Vec<NodeId>,
) -> Result<NodeId, ModelError> {
    let (n_r, n_h, d_a) = (cfg.n_r(), cfg.n_h, cfg.d_a());
    let partner = swap_halves(g, x, m * n_r)?;
    let split = [2 * m, n_r, n_h, d_a];
    let project = |g: &mut Graph<'_, T>, input: NodeId, which: &str| -> Result<NodeId, ModelError> {
        let w = fused_heads(g, p, layer, which, n_h)?;
        let y = g.matmul(input, w)?;
        let y = g.swap_middle_axes(y, split)?;
        Ok(g.reshape(y, &[2 * m * n_h, n_r, d_a])?)
    };
    let q = project(g, x, "W_q")?;
    let k = project(g, partner, "W_k")?;
    let v = project(g, partner, "W_v")?;

    let scores = g.bmm(q, k, true)?;
    let scores = g.scale(scores, T::from_f64(1.0 / (d_a as f64).sqrt()))?;
    let weights = match cfg.attn_norm {
        AttnNorm::Softmax => g.softmax_rows(scores)?,
        AttnNorm::RawEps => g.normalize_rows_raw(scores, T::from_f64(RAW_NORM_EPS))?,
    };
    attention.push(weights);
    let mixed = g.bmm(weights, v, false)?;
    // Back to one row per region with the heads concatenated.
    let mixed = g.swap_middle_axes(mixed, [2 * m, n_h, n_r, d_a])?;
    let cat = g.reshape(mixed, &[2 * m * n_r, n_h * d_a])?;
    let z = g.matmul(cat, p.id(&layer_param(layer, "W_head"))?)?;
    let z = g.add(x, z)?;
    Ok(g.matmul(z, p.id(&layer_param(layer, "W_diff"))?)?)
}

/// Pair-difference representations `(m, l_h)` from stacked regions.
pub fn hom_block<T: Element>(
    g: &mut Graph<'_, T>,
    p: &BoundParams,
    regions: NodeId,
    m: usize,
    cfg: &ModelConfig,
    attention: &mut Vec<NodeId>,
) -> Result<NodeId, ModelError> {
    let (n_r, l_r) = (cfg.n_r(), cfg.l_r);
    let mut x = regions;
    for layer in 0..cfg.hom_layers {
        x = hom_layer(g, p, x, layer, m, cfg, attention)?;
    }
    let flat = g.reshape(x, &[2 * m, n_r * l_r])?;
    let fa = g.slice_rows(flat, 0, m)?;
    let fb = g.slice_rows(flat, m, 2 * m)?;
    let z = g.concat_cols(&[fa, fb])?;
    let h = g.affine(z, p.id("hom.W_hom")?, Some(p.id("hom.b_hom")?))?;
    Ok(g.act(h, cfg.hidden_act)?)
}

/// Gated pooling of `(m, l_h)` differences; returns `(y_hat (1,1), alphas (m,1))`.
pub fn bag_block<T: Element>(
    g: &mut Graph<'_, T>,
    p: &BoundParams,
    diffs: NodeId,
) -> Result<(NodeId, NodeId), ModelError> {
    let u = g.affine(diffs, p.id("bag.mlp.W1")?, Some(p.id("bag.mlp.b1")?))?;
    let u = g.relu(u)?;
    let s = g.affine(u, p.id("bag.mlp.W2")?, Some(p.id("bag.mlp.b2")?))?;
    let alphas = g.sigmoid(s)?;
    let at = g.transpose(alphas)?;
    let pooled = g.matmul(at, diffs)?;
    let logit = g.affine(pooled, p.id("bag.W_bag")?, Some(p.id("bag.b_bag")?))?;
    Ok((g.sigmoid(logit)?, alphas))
}

/// Full forward pass of one bag.
pub fn forward_bag<T: Element>(
    g: &mut Graph<'_, T>,
    p: &BoundParams,
    record: &BagRecord,
    cfg: &ModelConfig,
    swap: Option<&[bool]>,
) -> Result<BagNodes, ModelError> {
    let m = record.m();
    let seqs = g.constant(stack_sequences(record, cfg, swap)?)?;
    let cond = g.constant(condition_tensor(record))?;
    let regions = cms_block(g, p, seqs, cond, cfg)?;
    let mut attention = Vec::new();
    let diffs = hom_block(g, p, regions, m, cfg, &mut attention)?;
    let (y_hat, alphas) = bag_block(g, p, diffs)?;
    Ok(BagNodes {
        y_hat,
        alphas,
        diffs,
        attention,
    })
}

//! Shared fixtures and a loop-by-loop reference model for integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use homnet::data::{BagRecord, BandLevel, ChromosomePair, ChromosomeSequence};
use homnet::model::{head_param, layer_param, AttnNorm, ModelConfig, ModelState, RAW_NORM_EPS};
use homnet::numerics::Activation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny_cfg() -> ModelConfig {
    ModelConfig {
        d: 8,
        k_mg: 4,
        l_r: 2,
        n_h: 2,
        hom_layers: 2,
        l_h: 6,
        m: 3,
        ..ModelConfig::default()
    }
}

pub fn random_seq(rng: &mut ChaCha8Rng, d: usize) -> ChromosomeSequence {
    let valid = rng.gen_range((d / 2).max(1)..=d);
    let mut row = || -> Vec<f32> { (0..d).map(|i| if i < valid { rng.gen_range(0.0..1.0) } else { 0.0 }).collect() };
    let left = row();
    let right = row();
    ChromosomeSequence::from_rows(left, right, valid).unwrap()
}

pub fn random_bag(seed: u64, d: usize, m: usize) -> BagRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..m)
        .map(|_| ChromosomePair::new(random_seq(&mut rng, d), random_seq(&mut rng, d)).unwrap())
        .collect();
    BagRecord {
        record_id: format!("bag{seed}"),
        subject_id: format!("subj{seed}"),
        chrom_type: rng.gen_range(0..24),
        band_level: [BandLevel::B300, BandLevel::B400, BandLevel::B550, BandLevel::B700][rng.gen_range(0..4)],
        label: rng.gen_range(0..2),
        pairs,
    }
}

type Mat = Vec<Vec<f64>>;

fn weight(state: &ModelState<f64>, name: &str) -> Mat {
    let t = state.get(name).unwrap();
    let cols = *t.shape().last().unwrap();
    t.data().chunks(cols).map(|r| r.to_vec()).collect()
}

fn mm(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

fn tr(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect()).collect()
}

fn relu(a: &Mat) -> Mat {
    a.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn activate(v: f64, kind: Activation) -> f64 {
    match kind {
        Activation::Relu => v.max(0.0),
        Activation::Sigmoid => sigmoid(v),
    }
}

/// Region matrix `(n_r, l_r)` of one chromosome.
pub fn oracle_regions(seq: &ChromosomeSequence, cond: &[f64], state: &ModelState<f64>, cfg: &ModelConfig) -> Mat {
    let (n_r, l_r, k) = (cfg.n_r(), cfg.l_r, cfg.k_mg);
    let kern = state.get("cms.merge_kernels").unwrap().data();
    let x = [seq.left(), seq.right()];
    let w_info = weight(state, "cms.W_info");
    let info: Vec<f64> = (0..n_r * l_r).map(|j| cond.iter().zip(&w_info).map(|(c, w)| c * w[j]).sum()).collect();
    let mut r = vec![vec![0.0; l_r]; n_r];
    for (e, row) in r.iter_mut().enumerate() {
        for (ch, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (side, xs) in x.iter().enumerate() {
                for j in 0..k {
                    acc += kern[(ch * 2 + side) * k + j] * f64::from(xs[e * k + j]);
                }
            }
            *v = acc + info[e * l_r + ch];
        }
    }
    let r1 = add(&r, &mm(&relu(&mm(&r, &weight(state, "cms.W_R1"))), &weight(state, "cms.W_R2")));
    let t = mm(&relu(&mm(&tr(&r1), &weight(state, "cms.W_R3"))), &weight(state, "cms.W_R4"));
    add(&r1, &tr(&t))
}

fn normalize(row: &[f64], norm: AttnNorm) -> Vec<f64> {
    match norm {
        AttnNorm::Softmax => {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        }
        AttnNorm::RawEps => {
            let s: f64 = row.iter().sum();
            let den = if s.abs() >= RAW_NORM_EPS { s } else if s < 0.0 { -RAW_NORM_EPS } else { RAW_NORM_EPS };
            row.iter().map(|v| v / den).collect()
        }
    }
}

/// One alignment layer for `x` against its homolog `partner`, head by head.
fn oracle_layer(x: &Mat, partner: &Mat, layer: usize, state: &ModelState<f64>, cfg: &ModelConfig) -> Mat {
    let n_r = x.len();
    let mut cat = vec![Vec::new(); n_r];
    for head in 0..cfg.n_h {
        let q = mm(x, &weight(state, &head_param(layer, head, "W_q")));
        let k = mm(partner, &weight(state, &head_param(layer, head, "W_k")));
        let v = mm(partner, &weight(state, &head_param(layer, head, "W_v")));
        let scale = 1.0 / (cfg.d_a() as f64).sqrt();
        for e in 0..n_r {
            let scores: Vec<f64> = (0..n_r)
                .map(|j| q[e].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() * scale)
                .collect();
            let w = normalize(&scores, cfg.attn_norm);
            for c in 0..cfg.d_a() {
                cat[e].push((0..n_r).map(|j| w[j] * v[j][c]).sum());
            }
        }
    }
    let z = add(x, &mm(&cat, &weight(state, &layer_param(layer, "W_head"))));
    mm(&z, &weight(state, &layer_param(layer, "W_diff")))
}

/// Difference vector of one pair from its two region matrices.
pub fn oracle_difference(ra: &Mat, rb: &Mat, state: &ModelState<f64>, cfg: &ModelConfig) -> Vec<f64> {
    let (mut a, mut b) = (ra.clone(), rb.clone());
    for layer in 0..cfg.hom_layers {
        let na = oracle_layer(&a, &b, layer, state, cfg);
        let nb = oracle_layer(&b, &a, layer, state, cfg);
        a = na;
        b = nb;
    }
    let z: Vec<f64> = a.iter().chain(&b).flatten().copied().collect();
    let w = weight(state, "hom.W_hom");
    let bias = state.get("hom.b_hom").unwrap().data();
    (0..cfg.l_h)
        .map(|j| activate(z.iter().zip(&w).map(|(v, row)| v * row[j]).sum::<f64>() + bias[j], cfg.hidden_act))
        .collect()
}

/// `(y_hat, alphas)` of gated pooling over pair differences.
pub fn oracle_pool(diffs: &[Vec<f64>], state: &ModelState<f64>) -> (f64, Vec<f64>) {
    let w1 = weight(state, "bag.mlp.W1");
    let b1 = state.get("bag.mlp.b1").unwrap().data();
    let w2 = weight(state, "bag.mlp.W2");
    let b2 = state.get("bag.mlp.b2").unwrap().data()[0];
    let alphas: Vec<f64> = diffs
        .iter()
        .map(|h| {
            let u: Vec<f64> = (0..b1.len())
                .map(|j| (h.iter().zip(&w1).map(|(v, r)| v * r[j]).sum::<f64>() + b1[j]).max(0.0))
                .collect();
            sigmoid(u.iter().zip(&w2).map(|(v, r)| v * r[0]).sum::<f64>() + b2)
        })
        .collect();
    let l_h = diffs[0].len();
    let pooled: Vec<f64> = (0..l_h).map(|j| diffs.iter().zip(&alphas).map(|(h, a)| a * h[j]).sum()).collect();
    let w_bag = weight(state, "bag.W_bag");
    let b_bag = state.get("bag.b_bag").unwrap().data()[0];
    (sigmoid(pooled.iter().zip(&w_bag).map(|(v, r)| v * r[0]).sum::<f64>() + b_bag), alphas)
}

/// End-to-end reference prediction for one bag.
pub fn oracle_predict(record: &BagRecord, state: &ModelState<f64>, cfg: &ModelConfig) -> (f64, Vec<f64>) {
    let cond = record.condition().concat();
    let diffs: Vec<Vec<f64>> = record
        .pairs
        .iter()
        .map(|p| {
            let b = if cfg.single_chromosome { ChromosomeSequence::zeros(cfg.d) } else { p.b.clone() };
            let ra = oracle_regions(&p.a, &cond, state, cfg);
            let rb = oracle_regions(&b, &cond, state, cfg);
            oracle_difference(&ra, &rb, state, cfg)
        })
        .collect();
    oracle_pool(&diffs, state)
}

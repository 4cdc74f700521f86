use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{encode_condition, BandLevel, ChromosomePair};

fn tiny_cfg() -> ModelConfig {
    ModelConfig {
        d: 16,
        k_mg: 4,
        l_r: 4,
        n_h: 2,
        hom_layers: 2,
        l_h: 6,
        m: 3,
        ..ModelConfig::default()
    }
}

fn random_seq(rng: &mut ChaCha8Rng, d: usize) -> ChromosomeSequence {
    let valid = rng.gen_range(d / 2..=d);
    let row = |rng: &mut ChaCha8Rng| -> Vec<f32> {
        (0..d).map(|i| if i < valid { rng.gen_range(0.0..1.0) } else { 0.0 }).collect()
    };
    let left = row(rng);
    let right = row(rng);
    ChromosomeSequence::from_rows(left, right, valid).unwrap()
}

fn random_bag(seed: u64, cfg: &ModelConfig) -> BagRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..cfg.m)
        .map(|_| ChromosomePair::new(random_seq(&mut rng, cfg.d), random_seq(&mut rng, cfg.d)).unwrap())
        .collect();
    BagRecord {
        record_id: "r".into(),
        subject_id: "s".into(),
        chrom_type: 3,
        band_level: BandLevel::B400,
        label: 1,
        pairs,
    }
}

fn zero_tensor(state: &mut ModelState<f64>, name: &str) {
    for v in state.get_mut(name).unwrap().data_mut() {
        *v = 0.0;
    }
}

#[test]
fn default_cms_output_is_regions_by_features() {
    let cfg = ModelConfig::default();
    let state = init_params(&cfg, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = random_seq(&mut rng, cfg.d);
    let cond = encode_condition(0, 300).unwrap();
    let r = cms_forward(&seq, &cond, &state, &cfg).unwrap();
    assert_eq!(r.shape(), &[16, 64]);
}

#[test]
fn zero_mixing_weights_leave_merged_regions() {
    let cfg = tiny_cfg();
    let mut state = init_params(&cfg, 5).unwrap();
    for name in ["cms.W_R1", "cms.W_R2", "cms.W_R3", "cms.W_R4"] {
        zero_tensor(&mut state, name);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = random_seq(&mut rng, cfg.d);
    let cond = encode_condition(7, 550).unwrap();
    let r = cms_forward(&seq, &cond, &state, &cfg).unwrap();

    // Direct evaluation of the merge plus condition offset.
    let k = state.get("cms.merge_kernels").unwrap();
    let w_info = state.get("cms.W_info").unwrap();
    let c = cond.concat();
    let (n_r, l_r) = (cfg.n_r(), cfg.l_r);
    for e in 0..n_r {
        for ch in 0..l_r {
            let mut acc = 0.0;
            for row in 0..2 {
                for j in 0..cfg.k_mg {
                    let x = f64::from(seq.values()[row * cfg.d + e * cfg.k_mg + j]);
                    acc += x * k.data()[(ch * 2 + row) * cfg.k_mg + j];
                }
            }
            let info: f64 = (0..c.len()).map(|i| c[i] * w_info.at2(i, e * l_r + ch)).sum();
            assert!((r.at2(e, ch) - (acc + info)).abs() < 1e-12);
        }
    }
}

#[test]
fn single_region_alignment_passes_values_through() {
    let cfg = ModelConfig {
        d: 4,
        k_mg: 4,
        l_r: 4,
        n_h: 2,
        hom_layers: 1,
        l_h: 4,
        m: 1,
        ..ModelConfig::default()
    };
    assert_eq!(cfg.n_r(), 1);
    for norm in [AttnNorm::Softmax, AttnNorm::RawEps] {
        let cfg = ModelConfig { attn_norm: norm, ..cfg.clone() };
        let state = init_params(&cfg, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let record = BagRecord {
            pairs: vec![ChromosomePair::new(random_seq(&mut rng, 4), random_seq(&mut rng, 4)).unwrap()],
            ..random_bag(0, &ModelConfig { m: 1, ..cfg.clone() })
        };
        for maps in attention_maps(&record, &state, &cfg).unwrap() {
            assert!(maps.data().iter().all(|w| (*w - 1.0).abs() < 1e-12), "{norm:?}: {maps:?}");
        }
    }
}

#[test]
fn zero_head_projection_reduces_to_diff_of_input() {
    let cfg = ModelConfig { hom_layers: 1, ..tiny_cfg() };
    let mut state = init_params(&cfg, 4).unwrap();
    zero_tensor(&mut state, &layer_param(0, "W_head"));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ra = Tensor::from_fn(&[cfg.n_r(), cfg.l_r], |_| rng.gen_range(-1.0..1.0));
    let rb = Tensor::from_fn(&[cfg.n_r(), cfg.l_r], |_| rng.gen_range(-1.0..1.0));
    let h = hom_align(&ra, &rb, &state, &cfg).unwrap();

    let w_diff = state.get(&layer_param(0, "W_diff")).unwrap();
    let w_hom = state.get("hom.W_hom").unwrap();
    let mut flat = Vec::new();
    for r in [&ra, &rb] {
        for e in 0..cfg.n_r() {
            for j in 0..cfg.l_r {
                flat.push((0..cfg.l_r).map(|i| r.at2(e, i) * w_diff.at2(i, j)).sum::<f64>());
            }
        }
    }
    for (o, got) in h.0.iter().enumerate() {
        let want = (0..flat.len()).map(|i| flat[i] * w_hom.at2(i, o)).sum::<f64>().max(0.0);
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn swapping_homologs_changes_the_difference() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ra = Tensor::from_fn(&[cfg.n_r(), cfg.l_r], |_| rng.gen_range(-1.0..1.0));
    let rb = Tensor::from_fn(&[cfg.n_r(), cfg.l_r], |_| rng.gen_range(-1.0..1.0));
    let ab = hom_align(&ra, &rb, &state, &cfg).unwrap();
    let ba = hom_align(&rb, &ra, &state, &cfg).unwrap();
    assert_ne!(ab, ba);
}

#[test]
fn pooling_is_permutation_invariant() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let diffs: Vec<_> = (0..4)
        .map(|_| PairDifference((0..cfg.l_h).map(|_| rng.gen_range(0.0..2.0)).collect()))
        .collect();
    let base = bag_forward(&diffs, &state, &cfg).unwrap();
    let perm = [2, 0, 3, 1];
    let shuffled: Vec<_> = perm.iter().map(|i| diffs[*i].clone()).collect();
    let out = bag_forward(&shuffled, &state, &cfg).unwrap();
    assert!((out.y_hat - base.y_hat).abs() < 1e-12);
    for (k, i) in perm.iter().enumerate() {
        assert!((out.alphas[k] - base.alphas[*i]).abs() < 1e-12);
    }
    assert!(base.y_hat > 0.0 && base.y_hat < 1.0);
    assert_eq!(base.alphas.len(), 4);
}

#[test]
fn equal_differences_get_equal_weights() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 8).unwrap();
    let h = PairDifference(vec![0.3, 1.0, 0.0, 2.0, 0.5, 0.1]);
    let out = bag_forward(&vec![h.clone(); 3], &state, &cfg).unwrap();
    assert!(out.alphas.iter().all(|a| (a - out.alphas[0]).abs() < 1e-15));

    let one = bag_forward(std::slice::from_ref(&h), &state, &cfg).unwrap();
    let w = state.get("bag.W_bag").unwrap();
    let b = state.get("bag.b_bag").unwrap().data()[0];
    let logit: f64 = h.0.iter().enumerate().map(|(i, v)| one.alphas[0] * v * w.data()[i]).sum::<f64>() + b;
    assert!((one.y_hat - 1.0 / (1.0 + (-logit).exp())).abs() < 1e-15);
}

#[test]
fn empty_bag_is_rejected() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 8).unwrap();
    assert!(matches!(bag_forward(&[], &state, &cfg), Err(ModelError::EmptyBag)));
}

#[test]
fn bag_pass_matches_piecewise_pass() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 10).unwrap();
    let record = random_bag(11, &cfg);
    let whole = predict_bag(&record, &state, &cfg).unwrap();
    let cond = record.condition();
    let diffs: Vec<_> = record
        .pairs
        .iter()
        .map(|p| {
            let ra = cms_forward(&p.a, &cond, &state, &cfg).unwrap();
            let rb = cms_forward(&p.b, &cond, &state, &cfg).unwrap();
            hom_align(&ra, &rb, &state, &cfg).unwrap()
        })
        .collect();
    let pieces = bag_forward(&diffs, &state, &cfg).unwrap();
    assert!((whole.y_hat - pieces.y_hat).abs() < 1e-12);
    for (a, b) in whole.alphas.iter().zip(&pieces.alphas) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn single_precision_tracks_double() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 12).unwrap();
    let record = random_bag(13, &cfg);
    let y64 = predict_bag(&record, &state, &cfg).unwrap().y_hat;
    let y32 = predict_bag(&record, &state.cast::<f32>(), &cfg).unwrap().y_hat;
    assert!((y64 - y32).abs() < 1e-5);
}

#[test]
fn attention_rows_sum_to_one_under_softmax() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 14).unwrap();
    let record = random_bag(15, &cfg);
    let maps = attention_maps(&record, &state, &cfg).unwrap();
    assert_eq!(maps.len(), cfg.hom_layers);
    assert_eq!(maps[0].shape(), &[2 * cfg.m * cfg.n_h, cfg.n_r(), cfg.n_r()]);
    for map in maps {
        for row in map.data().chunks(cfg.n_r()) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn wrong_length_bag_is_rejected() {
    let cfg = tiny_cfg();
    let state = init_params(&cfg, 0).unwrap();
    let record = random_bag(1, &ModelConfig { d: 32, ..cfg.clone() });
    assert!(matches!(predict_bag(&record, &state, &cfg), Err(ModelError::InvalidInput(_))));
}

#[test]
fn bce_matches_closed_forms() {
    assert!((bce_loss(0.5, 0) - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((bce_loss(0.9, 1) - 0.10536051565782628).abs() < 1e-12);
    assert!(bce_loss(1.0, 1) < 1e-6);
}

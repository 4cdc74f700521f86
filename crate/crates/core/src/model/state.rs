//! Named parameter tensors and their initialization.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::data::CONDITION_WIDTH;
use crate::numerics::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight { fan_in: usize, fan_out: usize },
    Bias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

fn weight(name: String, rows: usize, cols: usize) -> ParamSpec {
    ParamSpec {
        name,
        shape: vec![rows, cols],
        kind: ParamKind::Weight {
            fan_in: rows,
            fan_out: cols,
        },
    }
}

fn bias(name: &str, n: usize) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        shape: vec![n],
        kind: ParamKind::Bias,
    }
}

pub fn head_param(layer: usize, head: usize, which: &str) -> String {
    format!("hom.layer{layer}.attn.head{head}.{which}")
}

pub fn layer_param(layer: usize, which: &str) -> String {
    format!("hom.layer{layer}.attn.{which}")
}

/// Every learnable tensor of the model, in initialization order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (n_r, l_r, d_a, l_h) = (cfg.n_r(), cfg.l_r, cfg.d_a(), cfg.l_h);
    let mut specs = vec![
        ParamSpec {
            name: "cms.merge_kernels".into(),
            shape: vec![l_r, 1, 2, cfg.k_mg],
            kind: ParamKind::Weight {
                fan_in: 2 * cfg.k_mg,
                fan_out: l_r * 2 * cfg.k_mg,
            },
        },
        weight("cms.W_info".into(), CONDITION_WIDTH, n_r * l_r),
        weight("cms.W_R1".into(), l_r, l_r),
        weight("cms.W_R2".into(), l_r, l_r),
        weight("cms.W_R3".into(), n_r, n_r),
        weight("cms.W_R4".into(), n_r, n_r),
    ];
    for layer in 0..cfg.hom_layers {
        for head in 0..cfg.n_h {
            for which in ["W_q", "W_k", "W_v"] {
                specs.push(weight(head_param(layer, head, which), l_r, d_a));
            }
        }
        specs.push(weight(layer_param(layer, "W_head"), cfg.n_h * d_a, l_r));
        specs.push(weight(layer_param(layer, "W_diff"), l_r, l_r));
    }
    specs.push(weight("hom.W_hom".into(), 2 * n_r * l_r, l_h));
    specs.push(bias("hom.b_hom", l_h));
    specs.push(weight("bag.mlp.W1".into(), l_h, l_h / 2));
    specs.push(bias("bag.mlp.b1", l_h / 2));
    specs.push(weight("bag.mlp.W2".into(), l_h / 2, 1));
    specs.push(bias("bag.mlp.b2", 1));
    specs.push(weight("bag.W_bag".into(), l_h, 1));
    specs.push(bias("bag.b_bag", 1));
    specs
}

/// All learnable tensors, addressed by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState<T: Element = f64> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Element> ModelState<T> {
    /// Builds a state, checking names and shapes against `cfg`.
    pub fn from_tensors(cfg: &ModelConfig, tensors: BTreeMap<String, Tensor<T>>) -> Result<Self, ModelError> {
        let state = Self { tensors };
        state.check(cfg)?;
        Ok(state)
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let specs = param_specs(cfg);
        if specs.len() != self.tensors.len() {
            return Err(ModelError::StateMismatch(format!(
                "expected {} tensors, found {}",
                specs.len(),
                self.tensors.len()
            )));
        }
        for spec in specs {
            let t = self
                .tensors
                .get(&spec.name)
                .ok_or_else(|| ModelError::StateMismatch(format!("missing tensor {}", spec.name)))?;
            if t.shape() != spec.shape.as_slice() {
                return Err(ModelError::StateMismatch(format!(
                    "{} has shape {:?}, expected {:?}",
                    spec.name,
                    t.shape(),
                    spec.shape
                )));
            }
            t.ensure_finite(&spec.name)?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, ModelError> {
        self.tensors
            .get(name)
            .ok_or_else(|| ModelError::StateMismatch(format!("unknown tensor {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Element>(&self) -> ModelState<U> {
        ModelState {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    pub fn into_tensors(self) -> BTreeMap<String, Tensor<T>> {
        self.tensors
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }
}

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelState<f64>, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = param_specs(cfg)
        .into_iter()
        .map(|spec| {
            let t = match spec.kind {
                ParamKind::Bias => Tensor::zeros(&spec.shape),
                ParamKind::Weight { fan_in, fan_out } => {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    Tensor::from_fn(&spec.shape, |_| rng.gen_range(-bound..=bound))
                }
            };
            (spec.name, t)
        })
        .collect();
    ModelState::from_tensors(cfg, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_state() {
        let cfg = ModelConfig::default();
        let a = init_params(&cfg, 3).unwrap();
        let b = init_params(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&cfg, 4).unwrap());
    }

    #[test]
    fn biases_start_at_zero() {
        let cfg = ModelConfig::default();
        let state = init_params(&cfg, 1).unwrap();
        for spec in param_specs(&cfg).iter().filter(|s| s.kind == ParamKind::Bias) {
            assert!(state.get(&spec.name).unwrap().data().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn weight_means_are_near_zero() {
        let cfg = ModelConfig::default();
        let state = init_params(&cfg, 2).unwrap();
        for spec in param_specs(&cfg) {
            let ParamKind::Weight { fan_in, fan_out } = spec.kind else { continue };
            let t = state.get(&spec.name).unwrap();
            let n = t.len() as f64;
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            // Uniform(-b, b) has standard deviation b/√3; the mean of n draws b/√(3n).
            let sigma_mean = bound / (3.0 * n).sqrt();
            let mean = t.data().iter().sum::<f64>() / n;
            assert!(mean.abs() <= 3.0 * sigma_mean, "{}: mean {mean}", spec.name);
            assert!(t.data().iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn names_are_unique_and_shapes_checked() {
        let cfg = ModelConfig::default();
        let specs = param_specs(&cfg);
        let mut names: Vec<_> = specs.iter().map(|s| s.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), specs.len());
        let state = init_params(&cfg, 0).unwrap();
        let mut tensors = state.into_tensors();
        tensors.insert("cms.W_R1".into(), Tensor::zeros(&[2, 2]));
        assert!(ModelState::from_tensors(&cfg, tensors).is_err());
    }
}

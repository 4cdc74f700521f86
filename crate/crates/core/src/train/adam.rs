use std::collections::BTreeSet;

use crate::model::{ModelError, ModelState};
use crate::numerics::NumericsError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one tensor per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamMoments {
    pub m: ModelState<f64>,
    pub v: ModelState<f64>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamMoments {
    pub fn zeros_like(state: &ModelState<f64>) -> Self {
        Self {
            m: state.zeros_like(),
            v: state.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam step. Tensors in `frozen` are skipped entirely.
pub fn adam_update(
    state: &mut ModelState<f64>,
    grads: &ModelState<f64>,
    moments: &mut AdamMoments,
    hp: &AdamParams,
    frozen: &BTreeSet<String>,
) -> Result<(), ModelError> {
    moments.t += 1;
    let t = moments.t as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    for (name, p) in state.iter_mut() {
        if frozen.contains(name) {
            continue;
        }
        let g = grads.get(name)?;
        let m = moments.m.get_mut(name).ok_or_else(|| ModelError::StateMismatch(name.into()))?;
        if g.shape() != p.shape() || m.shape() != p.shape() {
            return Err(NumericsError::ShapeMismatch(format!("{name}: gradient {:?} vs {:?}", g.shape(), p.shape())).into());
        }
        let v = moments.v.get_mut(name).ok_or_else(|| ModelError::StateMismatch(name.into()))?;
        for (((w, gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = hp.beta1 * *mi + (1.0 - hp.beta1) * gi;
            *vi = hp.beta2 * *vi + (1.0 - hp.beta2) * gi * gi;
            *w -= hp.lr * (*mi / c1) / ((*vi / c2).sqrt() + hp.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn small() -> ModelConfig {
        ModelConfig {
            d: 8,
            k_mg: 4,
            l_r: 2,
            n_h: 1,
            hom_layers: 1,
            l_h: 2,
            m: 1,
            ..ModelConfig::default()
        }
    }

    fn fill(state: &ModelState<f64>, v: f64) -> ModelState<f64> {
        let mut g = state.zeros_like();
        for (_, t) in g.iter_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = v);
        }
        g
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let state0 = init_params(&small(), 1).unwrap();
        let mut state = state0.clone();
        let mut moments = AdamMoments::zeros_like(&state);
        adam_update(&mut state, &state0.zeros_like(), &mut moments, &AdamParams::with_lr(1e-3), &BTreeSet::new())
            .unwrap();
        assert_eq!(state, state0);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let state0 = init_params(&small(), 1).unwrap();
        let mut state = state0.clone();
        let mut moments = AdamMoments::zeros_like(&state);
        let grads = fill(&state, 2.0);
        adam_update(&mut state, &grads, &mut moments, &AdamParams::with_lr(1e-3), &BTreeSet::new()).unwrap();
        let want = -1e-3 * 2.0 / (2.0 + 1e-8);
        for ((_, a), (_, b)) in state.iter().zip(state0.iter()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frozen_tensor_is_untouched() {
        let state0 = init_params(&small(), 1).unwrap();
        let mut state = state0.clone();
        let mut moments = AdamMoments::zeros_like(&state);
        let frozen: BTreeSet<String> = ["cms.W_R1".to_string()].into();
        let grads = fill(&state, 0.5);
        adam_update(&mut state, &grads, &mut moments, &AdamParams::with_lr(1e-3), &frozen).unwrap();
        assert_eq!(state.get("cms.W_R1").unwrap(), state0.get("cms.W_R1").unwrap());
        assert!(moments.m.get("cms.W_R1").unwrap().data().iter().all(|v| *v == 0.0));
        assert_ne!(state.get("cms.W_R2").unwrap(), state0.get("cms.W_R2").unwrap());
    }
}

//! Logistic regression on handcrafted pair features.

use serde::{Deserialize, Serialize};

use super::features::{pair_features, FeatureConfig, PairFeatures};
use super::report::{EvalReport, RecordScore};
use super::{EvalError, DEFAULT_THRESHOLD};
use crate::data::BagRecord;
use crate::numerics::ops::sigmoid_scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub features: FeatureConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 500,
            lr: 0.5,
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    /// Full-batch gradient descent on the mean logistic loss. The L2 penalty
    /// (bias included) is applied as a proximal shrink, so any `l2 >= 0` is stable.
    pub fn fit(x: &[Vec<f64>], y: &[u8], cfg: &BaselineConfig) -> Result<Self, EvalError> {
        if x.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        if y.iter().all(|l| *l == y[0]) {
            return Err(EvalError::SingleClass);
        }
        let width = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; width];
        let mut scale = vec![0.0; width];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        for row in x {
            for ((s, m), v) in scale.iter_mut().zip(&mean).zip(row) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        let mut model = Self {
            mean,
            scale,
            weights: vec![0.0; width],
            bias: 0.0,
        };
        let z: Vec<Vec<f64>> = x.iter().map(|row| model.standardize(row)).collect();
        let shrink = 1.0 / (1.0 + cfg.lr * cfg.l2);
        for _ in 0..cfg.epochs {
            let mut gw = vec![0.0; width];
            let mut gb = 0.0;
            for (row, label) in z.iter().zip(y) {
                let err = model.score_standardized(row) - f64::from(*label);
                for (g, v) in gw.iter_mut().zip(row) {
                    *g += err * v / n;
                }
                gb += err / n;
            }
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w = (*w - cfg.lr * g) * shrink;
            }
            model.bias = (model.bias - cfg.lr * gb) * shrink;
        }
        Ok(model)
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn score_standardized(&self, z: &[f64]) -> f64 {
        let logit = self.bias + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        sigmoid_scalar(logit)
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.score_standardized(&self.standardize(row))
    }
}

fn bag_features(record: &BagRecord, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>, EvalError> {
    record
        .pairs
        .iter()
        .map(|p| pair_features(p, cfg).map(|f: PairFeatures| f.to_vec()))
        .collect()
}

/// Trains on every pair of the training bags (each pair inherits its bag's
/// label) and scores a test bag as the mean of its pair scores.
pub fn lr_baseline(train: &[BagRecord], test: &[BagRecord], cfg: &BaselineConfig) -> Result<EvalReport, EvalError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in train {
        for row in bag_features(record, &cfg.features)? {
            x.push(row);
            y.push(record.label);
        }
    }
    let model = LogisticModel::fit(&x, &y, cfg)?;
    let records = test
        .iter()
        .map(|record| {
            let rows = bag_features(record, &cfg.features)?;
            let score = rows.iter().map(|r| model.score(r)).sum::<f64>() / rows.len().max(1) as f64;
            Ok(RecordScore {
                record_id: record.record_id.clone(),
                score,
                label: record.label,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    EvalReport::new(records, DEFAULT_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let y = (0..20).map(|i| u8::from(i >= 10)).collect();
        (x, y)
    }

    #[test]
    fn separable_features_are_fit() {
        let (x, y) = toy();
        let cfg = BaselineConfig { l2: 0.0, epochs: 2000, ..BaselineConfig::default() };
        let model = LogisticModel::fit(&x, &y, &cfg).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(r, l)| u8::from(model.score(r) >= 0.5) == **l)
            .count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn heavy_penalty_flattens_scores() {
        let (x, y) = toy();
        let cfg = BaselineConfig { l2: 1e9, ..BaselineConfig::default() };
        let model = LogisticModel::fit(&x, &y, &cfg).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-9));
        assert!(x.iter().all(|r| (model.score(r) - 0.5).abs() < 1e-9));
    }

    #[test]
    fn single_class_training_is_rejected() {
        let (x, _) = toy();
        assert!(matches!(
            LogisticModel::fit(&x, &[1; 20], &BaselineConfig::default()),
            Err(EvalError::SingleClass)
        ));
    }
}

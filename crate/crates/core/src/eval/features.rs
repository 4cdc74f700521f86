use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::{ChromosomePair, ChromosomeSequence};

/// Dynamic time warping with absolute-difference cost and no window.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.is_empty() || y.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for xi in x {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = (xi - y[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Thresholds for counting peaks, in standard deviations from the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub peak_band: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { peak_band: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChromosomeStats {
    pub mean: f64,
    pub variance: f64,
    pub on_peak: usize,
    pub off_peak: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub a: ChromosomeStats,
    pub b: ChromosomeStats,
    pub dtw: f64,
    pub pearson_r: f64,
    pub covariance: f64,
}

impl PairFeatures {
    pub const WIDTH: usize = 11;

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::WIDTH);
        for s in [&self.a, &self.b] {
            v.extend([s.mean, s.variance, s.on_peak as f64, s.off_peak as f64]);
        }
        v.extend([self.dtw, self.pearson_r, self.covariance]);
        v
    }
}

fn channel_mean(seq: &ChromosomeSequence) -> Result<Vec<f64>, EvalError> {
    let n = seq.valid_len();
    if n < 3 {
        return Err(EvalError::DegenerateLength(n));
    }
    Ok(seq.left()[..n]
        .iter()
        .zip(&seq.right()[..n])
        .map(|(l, r)| (f64::from(*l) + f64::from(*r)) / 2.0)
        .collect())
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn stats(x: &[f64], cfg: &FeatureConfig) -> ChromosomeStats {
    let (mean, variance) = mean_var(x);
    let band = cfg.peak_band * variance.sqrt();
    let (mut on_peak, mut off_peak) = (0, 0);
    for w in x.windows(3) {
        if w[1] > w[0] && w[1] > w[2] && w[1] > mean + band {
            on_peak += 1;
        }
        if w[1] < w[0] && w[1] < w[2] && w[1] < mean - band {
            off_peak += 1;
        }
    }
    ChromosomeStats {
        mean,
        variance,
        on_peak,
        off_peak,
    }
}

/// Population covariance and Pearson correlation over the common prefix;
/// the correlation is reported as 0 when either variance vanishes.
pub fn pearson_and_covariance(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n as f64;
    let r = if vx == 0.0 || vy == 0.0 { 0.0 } else { cov / (vx * vy).sqrt() };
    (r, cov)
}

pub fn pair_features(pair: &ChromosomePair, cfg: &FeatureConfig) -> Result<PairFeatures, EvalError> {
    let a = channel_mean(&pair.a)?;
    let b = channel_mean(&pair.b)?;
    let (pearson_r, covariance) = pearson_and_covariance(&a, &b);
    Ok(PairFeatures {
        a: stats(&a, cfg),
        b: stats(&b, cfg),
        dtw: dtw_distance(&a, &b)?,
        pearson_r,
        covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(values: &[f32]) -> ChromosomeSequence {
        ChromosomeSequence::from_rows(values.to_vec(), values.to_vec(), values.len()).unwrap()
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 3.0]).unwrap(), 1.0);
        assert!(matches!(dtw_distance(&[], &[1.0]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn constant_sequence_has_no_peaks() {
        let p = ChromosomePair::new(seq(&[0.4; 10]), seq(&[0.4; 10])).unwrap();
        let f = pair_features(&p, &FeatureConfig::default()).unwrap();
        assert_eq!(f.a.variance, 0.0);
        assert_eq!((f.a.on_peak, f.a.off_peak), (0, 0));
        assert_eq!(f.covariance, 0.0);
        assert_eq!(f.pearson_r, 0.0);
        assert_eq!(f.dtw, 0.0);
    }

    #[test]
    fn shifted_alternation_anticorrelates() {
        let a: Vec<f32> = (0..12).map(|i| (i % 2) as f32).collect();
        let b: Vec<f32> = (1..13).map(|i| (i % 2) as f32).collect();
        let p = ChromosomePair::new(seq(&a), seq(&b)).unwrap();
        let f = pair_features(&p, &FeatureConfig::default()).unwrap();
        assert!(f.pearson_r < 0.0);
        // Interior ones are strict maxima above the band; interior zeros minima below.
        assert_eq!(f.a.on_peak, 5);
        assert_eq!(f.a.off_peak, 5);
    }

    #[test]
    fn short_sequences_are_degenerate() {
        let p = ChromosomePair::new(seq(&[0.1, 0.2]), seq(&[0.1, 0.2])).unwrap();
        assert!(matches!(pair_features(&p, &FeatureConfig::default()), Err(EvalError::DegenerateLength(2))));
    }

    proptest! {
        #[test]
        fn dtw_is_symmetric_and_zero_on_self(
            x in prop::collection::vec(-5.0f64..5.0, 1..20),
            y in prop::collection::vec(-5.0f64..5.0, 1..20),
        ) {
            let xy = dtw_distance(&x, &y).unwrap();
            prop_assert!((xy - dtw_distance(&y, &x).unwrap()).abs() < 1e-9);
            prop_assert!(xy >= 0.0);
            prop_assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
        }
    }
}

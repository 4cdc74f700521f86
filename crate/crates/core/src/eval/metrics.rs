use super::EvalError;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(format!(
            "{} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney statistic, ties at midrank.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|l| **l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        pos_rank_sum += midrank * order[i..=j].iter().filter(|k| labels[**k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total().max(1) as f64
    }
}

/// Counts with `score >= threshold` predicted positive.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion, EvalError> {
    check_lengths(scores, labels)?;
    let mut c = Confusion::default();
    for (s, l) in scores.iter().zip(labels) {
        match (*s >= threshold, *l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn f1_from_counts(c: &Confusion) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

pub fn f1(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(f1_from_counts(&confusion(scores, labels, threshold)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.3; 4], &[1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.8, 0.6, 0.4], &[1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(auc_roc(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass)));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(&[0.9, 0.1, 0.7], &[1, 0, 1], 0.5).unwrap(), 1.0);
        // TP at 0, FP at 1, FN at 2.
        assert_eq!(f1(&[0.9, 0.8, 0.2], &[1, 0, 1], 0.5).unwrap(), 0.5);
        assert_eq!(f1(&[0.1, 0.2], &[1, 0], 0.5).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn auc_complements_under_label_flip(
            pts in prop::collection::vec((0u8..20, 0u8..2), 2..40)
        ) {
            let scores: Vec<f64> = pts.iter().map(|p| f64::from(p.0) / 7.0).collect();
            let labels: Vec<u8> = pts.iter().map(|p| p.1).collect();
            let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            if let Ok(a) = auc_roc(&scores, &labels) {
                let b = auc_roc(&scores, &flipped).unwrap();
                prop_assert!((a + b - 1.0).abs() < 1e-12);
                let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect();
                prop_assert!((auc_roc(&warped, &labels).unwrap() - a).abs() < 1e-12);
            }
        }

        #[test]
        fn f1_agrees_with_counts(
            pts in prop::collection::vec((0.0f64..1.0, 0u8..2), 1..40)
        ) {
            let scores: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let labels: Vec<u8> = pts.iter().map(|p| p.1).collect();
            let c = confusion(&scores, &labels, 0.5).unwrap();
            prop_assert_eq!(c.total(), scores.len());
            prop_assert_eq!(f1(&scores, &labels, 0.5).unwrap(), f1_from_counts(&c));
        }
    }
}

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::data::BagRecord;

/// Fails with the shared subject ids if any subject appears on both sides.
pub fn check_disjoint(a: &[BagRecord], b: &[BagRecord]) -> Result<(), TrainError> {
    let left: BTreeSet<&str> = a.iter().map(|r| r.subject_id.as_str()).collect();
    let shared: Vec<String> = b
        .iter()
        .map(|r| r.subject_id.as_str())
        .filter(|s| left.contains(s))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(TrainError::SubjectOverlap(shared))
    }
}

/// Subject-disjoint train/validation/test partition of one site's records.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSplit {
    pub train: Vec<BagRecord>,
    pub val: Vec<BagRecord>,
    pub test: Vec<BagRecord>,
}

/// Splits subjects 1:4 into a training part and a test part, then holds out
/// a fifth of the training subjects (at least one) for validation.
pub fn split_site(records: &[BagRecord], seed: u64) -> Result<SiteSplit, TrainError> {
    let mut subjects: Vec<&str> = records
        .iter()
        .map(|r| r.subject_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if subjects.len() < 3 {
        return Err(TrainError::EmptyDataset(format!(
            "site has {} subjects; at least 3 are needed for train/validation/test",
            subjects.len()
        )));
    }
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = subjects.len();
    let n_fit = ((n as f64) / 5.0).round().clamp(2.0, (n - 1) as f64) as usize;
    let n_val = ((n_fit as f64) / 5.0).round().clamp(1.0, (n_fit - 1) as f64) as usize;
    let val: BTreeSet<&str> = subjects[..n_val].iter().copied().collect();
    let train: BTreeSet<&str> = subjects[n_val..n_fit].iter().copied().collect();
    let pick = |set: &BTreeSet<&str>| records.iter().filter(|r| set.contains(r.subject_id.as_str())).cloned().collect();
    let test_set: BTreeSet<&str> = subjects[n_fit..].iter().copied().collect();
    Ok(SiteSplit {
        train: pick(&train),
        val: pick(&val),
        test: pick(&test_set),
    })
}

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::ModelState;
use crate::numerics::Element;

/// Tensor-name prefixes frozen during site fine-tuning: the region
/// extractor and the first alignment layer.
pub const DEFAULT_FREEZE: [&str; 2] = ["cms.", "hom.layer0.attn."];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    /// Smallest increase of the monitored metric that counts as improvement.
    pub min_delta: f64,
    pub max_epochs: usize,
    /// Stop after this many optimizer steps, if set.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub freeze_set: Vec<String>,
    /// Exchange the two homologs of each pair with probability 1/2.
    pub swap_augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::pretrain()
    }
}

impl TrainConfig {
    pub fn pretrain() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 512,
            patience: 10,
            min_delta: 1e-4,
            max_epochs: 200,
            max_steps: None,
            seed: 0,
            freeze_set: Vec::new(),
            swap_augment: true,
        }
    }

    pub fn finetune() -> Self {
        Self {
            lr: 1e-5,
            freeze_set: DEFAULT_FREEZE.iter().map(|s| s.to_string()).collect(),
            ..Self::pretrain()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be at least 1");
        }
        Ok(())
    }
}

/// Names of all tensors covered by `prefixes`; every prefix must match.
pub fn resolve_freeze<T: Element>(state: &ModelState<T>, prefixes: &[String]) -> Result<BTreeSet<String>, TrainError> {
    let mut frozen = BTreeSet::new();
    for prefix in prefixes {
        let mut matched = false;
        for name in state.names().filter(|n| n.starts_with(prefix.as_str())) {
            matched = true;
            frozen.insert(name.to_string());
        }
        if !matched {
            return Err(TrainError::FreezeNameUnresolved(prefix.clone()));
        }
    }
    Ok(frozen)
}

//! Ranking and threshold metrics, the handcrafted-feature baseline, and
//! report output.

mod baseline;
mod features;
mod metrics;
mod report;

pub use baseline::{lr_baseline, BaselineConfig, LogisticModel};
pub use features::{dtw_distance, pair_features, pearson_and_covariance, ChromosomeStats, FeatureConfig, PairFeatures};
pub use metrics::{auc_roc, confusion, f1, f1_from_counts, Confusion, DEFAULT_THRESHOLD};
pub use report::{EvalReport, RecordScore};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("both classes must be present")]
    SingleClass,
    #[error("empty input")]
    EmptyInput,
    #[error("sequence has valid length {0}; at least 3 required")]
    DegenerateLength(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

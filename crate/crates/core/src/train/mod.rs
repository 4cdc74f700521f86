//! Optimization, early stopping, site fine-tuning and checkpoint files.

mod adam;
mod checkpoint;
mod config;
mod early_stop;
mod run;
mod split;

pub use adam::{adam_update, AdamMoments, AdamParams};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointError,
    CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{resolve_freeze, TrainConfig, DEFAULT_FREEZE};
pub use early_stop::{EarlyStopping, StopDecision};
pub use run::{
    bag_loss_and_grads, evaluate_bags, finetune, pretrain, train, EpochLog, FinetuneOutcome, TrainOutcome,
};
pub use split::{check_disjoint, split_site, SiteSplit};

use crate::eval::EvalError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("train and validation share subjects: {0:?}")]
    SubjectOverlap(Vec<String>),
    #[error("freeze prefix {0:?} matches no tensor")]
    FreezeNameUnresolved(String),
    #[error("data does not match the model: {0}")]
    DataMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

use std::fmt;

use crate::data::DataError;
use crate::eval::EvalError;
use crate::model::ModelError;
use crate::numerics::NumericsError;
use crate::synth::SynthError;
use crate::train::{CheckpointError, TrainError};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self { code: EXIT_USAGE, message: msg.to_string() }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self { code: EXIT_DATA, message: msg.to_string() }
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Self { code: EXIT_NUMERIC, message: msg.to_string() }
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        Self { code: EXIT_IO, message: msg.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(format!("config: {e}"))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) => Self::io(e),
            _ => Self::data(e),
        }
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::NonFinite(_) => Self::numeric(e),
            _ => Self::data(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) => Self::usage(e),
            SynthError::Data(d) => d.into(),
            _ => Self::data(e),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => Self::usage(e),
            ModelError::Numerics(n) => n.into(),
            _ => Self::data(e),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(_) => Self::io(e),
            _ => Self::data(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) | EvalError::Json(_) => Self::io(e),
            _ => Self::data(e),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) | TrainError::FreezeNameUnresolved(_) => Self::usage(e),
            TrainError::Model(m) => m.into(),
            TrainError::Eval(v) => v.into(),
            TrainError::Checkpoint(c) => c.into(),
            _ => Self::data(e),
        }
    }
}

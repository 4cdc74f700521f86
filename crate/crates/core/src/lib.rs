//! Structural-abnormality detection for chromosomes by comparing each
//! chromosome with its homolog.

pub mod cli;
pub mod data;
pub mod eval;
mod fsutil;
pub mod model;
pub mod numerics;
pub mod synth;
pub mod train;

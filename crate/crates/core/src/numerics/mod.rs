//! Dense arrays with reverse-mode differentiation, sized for the model in
//! [`crate::model`].

mod gradcheck;
mod graph;
pub mod ops;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, GradMismatch};
pub use graph::{bce_value, Gradients, Graph, NodeId, BCE_CLAMP};
pub use ops::Activation;
pub use tensor::{Element, Tensor};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("backward needs a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
}

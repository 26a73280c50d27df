use thiserror::Error;

/// Errors raised by the belief, risk, geometry and fusion routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VnbError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("Langevin chain diverged at iteration {iteration} (|theta| = {norm:.3e})")]
    SamplerDivergence { iteration: usize, norm: f64 },

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, VnbError>;

pub(crate) fn invalid(msg: impl Into<String>) -> VnbError {
    VnbError::InvalidInput(msg.into())
}

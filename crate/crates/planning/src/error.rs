use thiserror::Error;

use vnb_core::VnbError;

#[derive(Debug, Error)]
pub enum PlanningError {
    #[error(transparent)]
    Core(#[from] VnbError),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDivergence { epoch: usize, loss: f64 },

    #[error("simulation fault: {0}")]
    SimulationFault(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed weights file: {0}")]
    Weights(String),

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PlanningError>;

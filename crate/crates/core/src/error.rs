use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("stale dataset: {0}")]
    StaleDataset(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum FscError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state has {got} sites but model expects {expected}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("eigenvectors required but not computed")]
    MissingVectors,

    #[error("invalid cage construction: {0}")]
    InvalidCage(String),

    #[error("unknown export format {0:?}")]
    UnknownFormat(String),

    #[error("{0}")]
    Dynamics(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

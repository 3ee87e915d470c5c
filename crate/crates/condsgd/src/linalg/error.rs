use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { pivot: f64, index: usize },

    #[error("matrix is numerically singular: pivot magnitude {pivot:e} at column {column}")]
    Singular { pivot: f64, column: usize },

    #[error("dimension {dim} exceeds the supported limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("parse error in matrix text format: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

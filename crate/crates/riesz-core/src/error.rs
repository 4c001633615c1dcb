use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unbounded region: clip or truncate it before sampling")]
    UnboundedRegion,

    #[error("inversion pole: point coincides with the inversion center")]
    InversionPole,

    #[error("kernel is singular at coincident points")]
    CoincidentPoints,

    #[error("duplicate points in cloud (indices {0}, {1})")]
    DuplicatePoints(usize, usize),

    #[error("gram matrix failed the positive-definiteness monitor: {0}")]
    IndefiniteGram(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

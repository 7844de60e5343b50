use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("empty load vector")]
    Empty,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("instance too large: {points} grid points exceeds limit {limit}")]
    TooLarge { points: u128, limit: u128 },
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

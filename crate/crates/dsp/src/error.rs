use thiserror::Error;

/// Errors from transform construction and application.
#[derive(Debug, Error)]
pub enum DspError {
    #[error("empty input signal")]
    EmptyInput,

    #[error("invalid frame config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

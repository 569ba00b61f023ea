use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("backward called twice on the same tape")]
    TapeConsumed,

    #[error("duplicate parameter name: {0}")]
    DuplicateParam(String),

    #[error("unknown parameter: {0}")]
    UnknownParam(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

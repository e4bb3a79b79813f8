use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: shape mismatches, invalid parameters, NaN inputs.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An input the operation deliberately does not handle.
    #[error("unsupported input: {0}")]
    Unsupported(String),
    /// Non-finite values or non-convergence during computation.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// Malformed on-disk data.
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

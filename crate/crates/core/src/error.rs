use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("enumeration over {size} units exceeds the limit of {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: String, reason: String },

    #[error("singular kernel: {0}")]
    SingularKernel(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

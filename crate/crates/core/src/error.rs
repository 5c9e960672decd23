use thiserror::Error;

/// Errors produced while ingesting data, configuring, building, or loading an index.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input data (bad dimensions, duplicates, non-finite values).
    #[error("input error: {0}")]
    Input(String),

    /// Invalid configuration (epsilon out of range, constants below their floor, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem or stream failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// A serialized container could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    /// An internal invariant was violated. Always a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Unsupported file format, or a channel count the format cannot hold.
    #[error("format error: {0}")]
    Format(String),
    /// Truncated or malformed image data.
    #[error("decode error: {0}")]
    Decode(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    /// A caller broke a documented precondition (mismatched dimensions, bad system).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}

pub(crate) fn parameter<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

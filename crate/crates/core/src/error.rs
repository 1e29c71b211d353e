use std::io;

use thiserror::Error;

pub type Result<T, E = JedError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum JedError {
    #[error("shape mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    Shape {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid image data: {0}")]
    InvalidImage(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("malformed image file: {0}")]
    Decode(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bad configuration: {0}")]
    Config(String),

    #[error("dense oracle refused: {0}")]
    OracleGuard(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl JedError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        JedError::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

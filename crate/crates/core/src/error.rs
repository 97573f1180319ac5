use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A cascade with fewer than two nodes has no prediction point.
    #[error("degenerate cascade of length {len}: at least 2 nodes are required")]
    DegenerateCascade { len: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite gradient in parameter `{parameter}`")]
    NonFiniteGradient { parameter: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

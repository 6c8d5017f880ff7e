use thiserror::Error;

/// Errors raised by tensor, decomposition, solver and file operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for extent {extent} (mode {mode})")]
    Bounds {
        mode: usize,
        index: usize,
        extent: usize,
    },

    #[error("mode {mode} is invalid for a tensor of order {order}")]
    Mode { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tensor file format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

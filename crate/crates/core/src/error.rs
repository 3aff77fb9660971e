use std::io;

use thiserror::Error;

/// Errors produced anywhere in the model, trainer or tooling.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (widths, shifts, thresholds, timesteps, seeds).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data that violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Vector or matrix sizes that do not line up.
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("bad magic in {what}: expected {expected}, found {found}")]
    BadMagic {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("truncated {what}: need {needed} bytes, have {available}")]
    Truncated {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    /// Training or quantization produced a numerically unusable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum HommError {
    /// A dense moment tensor would exceed the configured scalar budget.
    #[error("tensor of order {order} over width {width} needs {needed} scalars, cap is {cap}")]
    Capacity {
        width: usize,
        order: u32,
        needed: String,
        cap: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HommError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        HommError::Contract(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        HommError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = HommError> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{what} needs {required} spins but exact enumeration is limited to {limit}")]
    Capacity {
        what: &'static str,
        required: usize,
        limit: usize,
    },

    #[error("{context} needs at least {required} points, got {actual}")]
    InsufficientData {
        context: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("R^2 is undefined for constant targets")]
    ConstantTarget,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("feature column {column} is constant and cannot be standardized")]
    DegenerateFeature { column: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            actual,
        })
    }
}

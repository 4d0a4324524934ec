use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sampling mismatch: {0}")]
    SamplingMismatch(String),

    #[error("interaction matrix is not symmetric at ({i}, {j})")]
    AsymmetricInteraction { i: usize, j: usize },

    #[error("missing signal `{0}` (only available from simulation)")]
    MissingSignal(&'static str),

    #[error("empty zone set")]
    EmptyZoneSet,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{path}: row {row}, column `{column}`: {reason}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("config {location}: {reason}")]
    Config { location: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinite(format!("{what}[{k}]"))),
        None => Ok(()),
    }
}

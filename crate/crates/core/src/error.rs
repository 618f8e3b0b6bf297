use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CalibError>;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("value {0} is not a probability in [0, 1]")]
    InvalidProbability(f64),

    #[error("outcome {0} is not binary")]
    NonBinaryOutcome(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite (min eigenvalue {0})")]
    NotPositiveDefinite(f64),

    #[error("forecast {0} is not a bin midpoint of the current scheme")]
    NotAMidpoint(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("not enough data: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("truth is not available for this stream")]
    TruthUnavailable,

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

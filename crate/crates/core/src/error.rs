use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: cannot parse {cell:?} as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        cell: String,
    },

    #[error("{path}: column {column} has no values")]
    EmptyColumn { path: PathBuf, column: String },

    #[error("{path}: no column {column}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("iteration {iteration} has an empty training set")]
    EmptyTrainingSet { iteration: usize },

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unstable process: {0}")]
    Unstable(String),

    #[error("singular design matrix")]
    SingularDesign,

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

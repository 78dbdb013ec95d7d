use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the forecasting toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("non-monotone index: {0} does not follow {1}")]
    NonMonotoneIndex(i64, i64),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("missing values present")]
    MissingValues,

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("zero variance")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    #[error("series still non-stationary after differencing {0} times")]
    NonStationary(usize),

    #[error("no split in forest: importances undefined")]
    NoSplits,

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Parse { .. }
            | Error::NonMonotoneIndex(..)
            | Error::UnknownColumn(_)
            | Error::DuplicateColumn(_)
            | Error::MissingValues
            | Error::TooFewPoints { .. }
            | Error::LengthMismatch(..)
            | Error::InvalidArgument(_) => ErrorKind::Data,
            Error::ZeroVariance
            | Error::NonFinite(_)
            | Error::DegenerateRegression(_)
            | Error::Singular(_)
            | Error::NonConvergence(_)
            | Error::NonStationary(_)
            | Error::NoSplits => ErrorKind::Numerical,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

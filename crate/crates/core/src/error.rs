use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: decompression failed: {source}")]
    Decompress {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dictionary line {line}: {message}")]
    Dictionary { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("feature width mismatch: model expects {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need both classes present, {0}")]
    SingleClass(String),

    #[error("non-finite value in feature column {column}, row {row}")]
    NonFinite { row: usize, column: usize },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("outer fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps `self` with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Fold { source, .. } | Error::Stage { source, .. } => source.kind(),
            Error::Io { .. }
            | Error::Decompress { .. }
            | Error::Dictionary { .. }
            | Error::InvalidInput(_)
            | Error::Empty(_)
            | Error::WidthMismatch { .. }
            | Error::LengthMismatch(..)
            | Error::SingleClass(_)
            | Error::NonFinite { .. }
            | Error::Undefined(_)
            | Error::Insufficient(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Data,
        }
    }
}

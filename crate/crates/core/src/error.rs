use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: dataset is missing column `{column}`")]
    MissingColumn { column: String },

    #[error("row {row}: cannot parse column `{column}` from value {value:?}")]
    Row {
        row: usize,
        column: String,
        value: String,
    },

    /// A combinatorial guard tripped; the instance is too large for exact methods.
    #[error("instance too large: {0}")]
    Size(String),

    /// An internal consistency check failed. Indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem or malformed input files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv(_) | Error::Json(_))
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("record {utt_id}: {message}")]
    InvalidRecord { utt_id: String, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("training data contains a single class: {0}")]
    SingleClass(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(utt_id: &str, message: impl Into<String>) -> Self {
        Error::InvalidRecord {
            utt_id: utt_id.to_string(),
            message: message.into(),
        }
    }

    /// True for failures caused by the environment rather than by user input.
    pub fn is_runtime(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

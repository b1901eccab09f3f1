use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown {kind} '{name}' (vocabulary is frozen)")]
    UnknownSymbol {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        name: String,
    },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension must be a positive even number, got {0}")]
    OddDimension(usize),

    #[error("{what} id {id} out of range (size {size})")]
    OutOfRange {
        what: &'static str,
        id: usize,
        size: usize,
    },

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("non-finite {what} at epoch {epoch}, batch {batch}")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("unsatisfiable synthetic spec: {0}")]
    Unsatisfiable(String),

    #[error("{0}")]
    Undefined(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (usage or configuration).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::OddDimension(_) | Error::Mismatch(_)
        )
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Range { key: String, message: String },

    #[error("logs come from different configurations ({expected} vs {found})")]
    MismatchedConfig { expected: String, found: String },

    #[error("malformed csv {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn range(key: &str, msg: impl Into<String>) -> Self {
        Error::Range {
            key: key.to_string(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

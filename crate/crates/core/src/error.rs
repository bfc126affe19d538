use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index error: {0}")]
    Index(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown sensor id `{0}`")]
    UnknownSensor(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad input (config, data, arguments) rather
    /// than failures while running.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Training(_) | Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

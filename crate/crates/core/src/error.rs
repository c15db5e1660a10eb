use std::path::PathBuf;

/// Errors produced by the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("pixel ({row}, {col}) outside {height}x{width} image")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed image: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: unsupported image: {reason}")]
    Unsupported { path: PathBuf, reason: String },

    #[error("{context}: {reason}")]
    Parse { context: String, reason: String },

    #[error("inconsistent data: {0}")]
    Inconsistent(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

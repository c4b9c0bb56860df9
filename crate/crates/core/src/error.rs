use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} file: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("unsupported maxval {0} (expected 65535)")]
    UnsupportedMaxval(u32),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate body box (width {width}, height {height})")]
    DegenerateBodyBox { width: f64, height: f64 },

    #[error("no person found in the depth window")]
    NoPersonFound,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("joint count mismatch: expected {expected}, got {actual}")]
    JointCount { expected: usize, actual: usize },

    #[error("parameter mismatch: {0}")]
    Params(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid encoding mask {0:?}")]
    InvalidMask([i8; 3]),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("series too short: length {len}, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unknown system '{0}'")]
    UnknownSystem(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 bad arguments, 3 I/O or unreadable input,
    /// 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } => 3,
            Error::Numeric(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

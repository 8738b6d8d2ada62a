use std::path::PathBuf;

/// Error type shared by the whole toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structural mismatch between shapes, lengths or frame counts.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A parameter outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Numerical failure during iteration (NaN/Inf, zero operator, ...).
    #[error("numerical error: {0}")]
    Numeric(String),

    /// Filesystem error with the offending path attached.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents; `offset` is the byte position of the failure.
    #[error("parse error in {path} at byte {offset}: {msg}")]
    Parse {
        path: PathBuf,
        offset: u64,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

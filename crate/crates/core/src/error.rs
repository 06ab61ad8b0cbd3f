use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or sampler parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Array dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input data could not be interpreted.
    #[error("data error: {0}")]
    Data(String),

    /// An operation was invoked on a model in the wrong state.
    #[error("invalid state: {0}")]
    State(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// Configuration rejected before any sampling took place.
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_len(what: &str, actual: usize, expected: usize) -> Result<()> {
    if actual == expected {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what}: expected length {expected}, got {actual}"
        )))
    }
}

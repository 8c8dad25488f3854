use std::path::PathBuf;

use thiserror::Error;

use crate::feature::Level;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure reading or writing an `RFM1` feature-map file.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes {found:?}, expected \"RFM1\"")]
    BadMagic { found: [u8; 4] },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("invalid header: {0}")]
    Header(String),
    #[error("trailing bytes after payload: {0}")]
    Trailing(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error(transparent)]
    RawFormat(#[from] FormatError),

    #[error("scenario generation failed: {0}")]
    Generation(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("weibull fit failed: {0}")]
    Fit(String),

    #[error("missing data for level {0}")]
    MissingLevel(Level),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for data errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::Fit(_) => 3,
            _ => 2,
        }
    }
}

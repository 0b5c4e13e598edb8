use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by scatterkit operations.
#[derive(Debug, Error)]
pub enum ScatterError {
    /// An argument violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration is internally inconsistent (for example, a
    /// scattering order larger than the number of scales).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A file does not follow the expected binary or text layout.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// Two inputs that must agree (image and label counts, say) do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// A numerical routine could not produce a trustworthy answer.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ScatterError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ScatterError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ScatterError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ScatterError>;

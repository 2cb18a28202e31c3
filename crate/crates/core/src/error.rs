use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid tree, mesh or run configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the domain of a numerical operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A problem would exceed the configured resource limits.
    #[error("resource error: {0}")]
    Resource(String),
    /// An iterative method failed to converge or produced non-finite values.
    #[error("numeric error: {message}")]
    Numeric { message: String, trace: Vec<f64> },
    /// An extrapolated quantity did not reach the requested accuracy.
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric {
            message: message.into(),
            trace: Vec::new(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

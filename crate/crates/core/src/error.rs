use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A point lies beyond the range covered by a dyadic grid.
    #[error("range error: {0}")]
    Range(String),

    /// A quadrature, root-finder or eigensolver failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A truncated series or Monte-Carlo estimate could not reach the requested accuracy.
    #[error("precision error: {message}")]
    Precision {
        message: String,
        /// Suggested resource (degree, sample count) that would meet the tolerance.
        hint: Option<u64>,
    },

    /// An object could not be constructed from the given pieces.
    #[error("construction error: {0}")]
    Construction(String),

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn precision(message: impl Into<String>, hint: Option<u64>) -> Self {
        Error::Precision {
            message: message.into(),
            hint,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

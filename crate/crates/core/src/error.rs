use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument to a library routine (shape mismatch, out-of-range parameter).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside the grid support (tolerance {tolerance})")]
    OutOfSupport { point: Vec<f64>, tolerance: f64 },

    #[error("observation covariance is not positive definite at x = {x:?}")]
    Factorization { x: Vec<f64> },

    #[error("likelihood evaluation failed at cell {cell}: {source}")]
    Likelihood {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    /// Every cell of the posterior vanished, even after the log-domain retry.
    #[error("all-zero posterior at t = {t} (max likelihood entry {max_likelihood:e})")]
    ZeroPosterior { t: i64, max_likelihood: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Context { source, .. } => source.exit_code(),
            Error::Likelihood { .. } | Error::Factorization { .. } | Error::ZeroPosterior { .. } => 3,
            Error::InsufficientData(_) => 3,
            Error::Io { .. } | Error::Format(_) => 4,
            Error::InvalidArgument(_) | Error::OutOfSupport { .. } | Error::Config(_) => 2,
        }
    }
}

use thiserror::Error;

/// Errors raised by estimators, selectors and the experiment plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its documented domain.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("quadrature did not reach tolerance {tolerance:e} (error estimate {estimate:e})")]
    QuadratureNotConverged { tolerance: f64, estimate: f64 },

    /// Hölder certification (or a related model precheck) failed.
    #[error("certification failed: {0}")]
    Certification(String),

    #[error("sample of size {n} is too small: {reason}")]
    SampleTooSmall { n: usize, reason: String },

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Schema violations in configuration files; `path` names the offending key.
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed user input rather than numeric failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument { .. } | Error::Parse(_))
    }
}

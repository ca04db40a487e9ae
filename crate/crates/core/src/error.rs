use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge (estimate {estimate:e}, error {error:e})")]
    Convergence {
        what: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("calibration failed: coefficient of variation {cv:e} exceeds {limit:e}")]
    Calibration { cv: f64, limit: f64 },

    #[error("state error: {0}")]
    State(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Config(_) | Error::Unsupported(_) | Error::Index(_)
        )
    }

    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::Calibration { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

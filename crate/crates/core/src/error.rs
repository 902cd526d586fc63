use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("slot {slot} has no counts in its encoded basis")]
    UndefinedSlot { slot: usize },

    #[error("invalid modulation sequence: {0}")]
    InvalidSequence(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("fit did not converge after {iterations} iterations (weighted rss {rss:.4e}, reduced chi2 {reduced_chi2:.4})")]
    FitFailure {
        iterations: usize,
        rss: f64,
        reduced_chi2: f64,
    },

    #[error("key rate is not positive at zero channel loss")]
    NoPositiveRate,

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a numeric procedure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::FitFailure { .. }
                | Error::NoPositiveRate
                | Error::DegenerateSeries(_)
                | Error::DegenerateSpectrum(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

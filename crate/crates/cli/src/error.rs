use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] polqkd_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for invalid input, 2 for I/O failures, 3 for numeric failures.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io { .. } => ExitCode::from(2),
            CliError::Core(e) if e.is_io() => ExitCode::from(2),
            CliError::Core(e) if e.is_numeric() || matches!(e, polqkd_core::Error::Resource(_)) => {
                ExitCode::from(3)
            }
            _ => ExitCode::from(1),
        }
    }
}

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] anyres::error::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// Numerical aborts get their own code; every other failure is a
    /// usage, config or input problem.
    pub fn exit_code(&self) -> i32 {
        use anyres::error::Error;
        match self {
            CliError::Core(Error::NonFinite(_) | Error::Numerical(_)) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

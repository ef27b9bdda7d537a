use thiserror::Error;
use tkm_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("at k={k}: {source}")]
    Rate { k: u128, source: CoreError },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// 0 pass, 1 validation failure, 2 config error, 3 rate overflow,
    /// 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Core(CoreError::Input(_)) => 2,
            CliError::Core(CoreError::Overflow(_)) | CliError::Rate { source: CoreError::Overflow(_), .. } => 3,
            CliError::Core(_) | CliError::Rate { .. } | CliError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

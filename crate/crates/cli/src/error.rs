use hpw_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Metadata(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Metadata(_) => 3,
            CliError::Parse { .. } => 4,
            CliError::Internal(_) => 1,
        }
    }

    /// Wraps a core error raised while reading or combining `path`.
    pub fn from_core_at(path: &std::path::Path, e: Error) -> Self {
        match e {
            Error::Parse { .. } => CliError::Parse { path: path.display().to_string(), message: e.to_string() },
            other => other.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Metadata(_) => CliError::Metadata(e.to_string()),
            Error::Parse { .. } => CliError::Parse { path: "<input>".into(), message: e.to_string() },
            Error::InvalidSteps(_) => CliError::Config(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

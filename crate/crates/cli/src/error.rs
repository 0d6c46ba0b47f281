use anyon_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Physics(CoreError),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Physics(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), message: e.to_string() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::AtGamma { ref source, .. } if matches!(**source, CoreError::InvalidInput(_)) => CliError::Config(e.to_string()),
            CoreError::InvalidInput(_)
            | CoreError::UnknownGate(_)
            | CoreError::Json(_)
            | CoreError::StepTooLarge { .. }
            | CoreError::UnphysicalNoise { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::IndexOutOfRange { .. }
            | CoreError::LatticeTooLarge { .. } => CliError::Config(e.to_string()),
            CoreError::Unreachable { .. } | CoreError::NonMonotone(_) | CoreError::Degenerate(_) => {
                CliError::NonConvergence(e.to_string())
            }
            _ => CliError::Physics(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

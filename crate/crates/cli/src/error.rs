use thiserror::Error;

/// Failure of a command, carrying its process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data not informative: {0}")]
    Informativity(String),
    #[error("LMI infeasible: {0}")]
    Infeasible(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error(transparent)]
    Core(#[from] ddctl_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Informativity(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Certification(_) => 5,
            CliError::Core(_) | CliError::Io(_) | CliError::Other(_) => 1,
        }
    }

    /// Short machine-readable status used in manifests.
    pub fn status(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config-error",
            CliError::Informativity(_) => "not-informative",
            CliError::Infeasible(_) => "lmi-infeasible",
            CliError::Certification(_) => "certification-failed",
            CliError::Core(_) | CliError::Io(_) | CliError::Other(_) => "error",
        }
    }
}

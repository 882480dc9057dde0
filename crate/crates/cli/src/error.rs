use thiserror::Error;

/// Failure of a subcommand, classified for the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("estimation failed: {0}")]
    Fit(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Fit(_) => 4,
            CliError::Solver(_) => 5,
            CliError::Io(_) => 6,
        }
    }

    /// Library error tagged with the pipeline stage it came from.
    pub fn stage(stage: impl std::fmt::Display, e: sysrisk::Error) -> Self {
        use sysrisk::Error as E;
        let msg = format!("{stage}: {e}");
        match e {
            E::InvalidParameter(_) | E::InvalidInput(_) | E::Unsupported(_) | E::DimensionMismatch { .. } => {
                CliError::Config(msg)
            }
            E::Data(_) | E::Csv(_) | E::Io(_) => CliError::Data(msg),
            E::Fit(_) | E::NotConverged { .. } => CliError::Fit(msg),
            E::NoBracket { .. } => CliError::Solver(msg),
            E::Json(_) => CliError::Io(msg),
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

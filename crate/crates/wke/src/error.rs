use std::path::Path;

use wke_core::Error as CoreError;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid field file: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0} check(s) reported violations")]
    Violations(usize),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// `1` for violations, `3` for solver failures, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violations(_) => 1,
            CliError::Core(
                CoreError::NonContraction { .. }
                | CoreError::NormBlowup { .. }
                | CoreError::Stall { .. }
                | CoreError::NestingViolation { .. },
            ) => 3,
            _ => 2,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Format(e.to_string())
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Exit code for invalid flags, scenarios, traces or parameters.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code when no feasible placement exists.
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] smvmp_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use smvmp_core::Error as E;
        match self {
            CliError::Core(E::Infeasible(_) | E::CapacityViolated(_)) => EXIT_INFEASIBLE,
            CliError::Core(_) | CliError::Parse { .. } | CliError::Json { .. } | CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => 1,
        }
    }
}

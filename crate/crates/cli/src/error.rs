use std::path::Path;

use thiserror::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or config values (exit 2).
    #[error("{0}")]
    Usage(String),
    /// A referenced input file is missing, unreadable or malformed (exit 3).
    #[error("{0}")]
    Input(String),
    /// Anything that goes wrong after the inputs were accepted (exit 4).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn input(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    pub fn runtime(what: impl std::fmt::Display) -> Self {
        CliError::Runtime(what.to_string())
    }
}

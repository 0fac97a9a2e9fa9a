use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver error: {0}")]
    Solver(fgssc::Error),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Dimension(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn parse(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Parse(format!("{}: {err}", path.display()))
    }
}

impl From<fgssc::Error> for CliError {
    fn from(err: fgssc::Error) -> Self {
        match err {
            fgssc::Error::DimensionMismatch { .. } | fgssc::Error::LengthMismatch(..) => {
                CliError::Dimension(err.to_string())
            }
            fgssc::Error::InvalidConfig(msg) => CliError::Parse(msg),
            other => CliError::Solver(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

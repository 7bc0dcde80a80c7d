use std::io;

use thiserror::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Validation = 2,
    Numerical = 3,
    Io = 4,
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl AppError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            AppError::Validation(_) => ExitStatus::Validation,
            AppError::Numerical(_) => ExitStatus::Numerical,
            AppError::Io(_) => ExitStatus::Io,
        }
    }
}

impl From<duffing_core::Error> for AppError {
    fn from(e: duffing_core::Error) -> Self {
        use duffing_core::Error as E;
        match e {
            E::Validation(_) | E::IndexOutOfRange { .. } => AppError::Validation(e.to_string()),
            _ => AppError::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for AppError {
    fn from(e: io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

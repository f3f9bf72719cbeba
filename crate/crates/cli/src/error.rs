use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("integration failed: {0}")]
    Integration(String),

    /// `design` could not establish `k < sqrt(xi * l * m)`.
    #[error("certificate not established: {0}")]
    Certificate(String),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Read { .. } => 2,
            CliError::Integration(_) => 3,
            CliError::Certificate(_) => 4,
            CliError::Write { .. } => 1,
        }
    }
}

impl From<cart_core::Error> for CliError {
    fn from(e: cart_core::Error) -> Self {
        use cart_core::Error as E;
        match e {
            E::StepSizeUnderflow { .. } | E::NegativeState { .. } => CliError::Integration(e.to_string()),
            E::InvalidInput { .. } | E::DegenerateParameter(_) | E::Precondition(_) => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

use thiserror::Error;

/// Errors raised by the model, analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step size underflow at t = {t} days")]
    StepSizeUnderflow { t: f64 },

    #[error("population x{component} fell to {value:e} at t = {t} days")]
    NegativeState { t: f64, component: usize, value: f64 },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

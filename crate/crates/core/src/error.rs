use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain on which the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or adaptive numerical method did not reach its target.
    /// `best` carries the best available estimate and `error_bound` its
    /// estimated absolute error.
    #[error("numeric failure: {message} (best estimate {best}, error bound {error_bound})")]
    NumericFailure {
        message: String,
        best: f64,
        error_bound: f64,
    },

    /// A model specification violated one or more invariants.
    #[error("invalid model: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// The operation is not defined for the model's recurrence regime.
    #[error("wrong regime: {0}")]
    WrongRegime(String),

    /// Not enough usable samples for a statistical estimate.
    #[error("insufficient data: need at least {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, best: f64, error_bound: f64) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            best,
            error_bound,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by message computations, sweeps and the EM loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance matrix is not invertible")]
    SingularCovariance,

    /// The weight matrix is singular, so the message has no moment form.
    #[error("degenerate message: weight matrix is singular")]
    DegenerateMessage,

    #[error("parameter is unidentifiable: combined weight matrix is singular")]
    UnidentifiableParameter,

    #[error("singular linear system in {0}")]
    SingularSystem(&'static str),

    #[error("noise covariance is singular but its inverse is required")]
    SingularNoise,

    #[error("quadratic fit residual {residual:e} exceeds tolerance")]
    IllConditionedFit { residual: f64 },

    /// The observation likelihood is not a proper density, e.g. because the
    /// initial-state prior leaves an observed direction flat.
    #[error("improper likelihood at observation {0}")]
    ImproperLikelihood(usize),

    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

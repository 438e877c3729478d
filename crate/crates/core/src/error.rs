use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("intersection projection did not reach tolerance {tolerance:e} after {iterations} cycles (residual {residual:e})")]
    ProjectionTolerance {
        residual: f64,
        tolerance: f64,
        iterations: usize,
    },

    #[error("empty band: accepted {accepted} of {attempts} proposals (acceptance rate {rate:e})")]
    EmptyBand {
        accepted: usize,
        attempts: usize,
        rate: f64,
    },

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("unknown builtin problem `{0}`")]
    UnknownBuiltin(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("not differentiable at the query point ({0})")]
    NotDifferentiable(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("grid too large: {0}")]
    GridTooLarge(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

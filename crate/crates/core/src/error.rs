use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite objective value {value} at step {step}")]
    NonFiniteQuery { step: usize, value: f64 },
    #[error("direction of kind {found:?} where {expected:?} was required")]
    DirectionKind {
        expected: crate::sampling::DirectionKind,
        found: crate::sampling::DirectionKind,
    },
    #[error("direction is not unit norm (|u| = {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("feasible set cannot be shrunk: {0}")]
    UnsupportedShrink(String),
    #[error("feasible set has no inner radius")]
    MissingInnerRadius,
    #[error("query contract violated: {0}")]
    QueryContract(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

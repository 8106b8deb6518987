use thiserror::Error;

/// Errors raised by the chained-Bell toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("boost velocity must satisfy |beta| < 1, got {0}")]
    InvalidBoost(f64),

    #[error("measurement events are not spacelike separated ({0:?})")]
    NotSpacelike(crate::spacetime::IntervalClass),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate phase scan: {0}")]
    DegenerateScan(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

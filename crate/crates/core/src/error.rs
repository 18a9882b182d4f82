use thiserror::Error;

use crate::quantities::Dimension;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch {
        expected: Dimension,
        found: Dimension,
    },

    #[error("non-finite value {value} for {what}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("invalid {what}: {detail}")]
    InvalidParameter { what: &'static str, detail: String },

    #[error("unit parse error: {0}")]
    UnitParse(String),

    #[error("geometry overlap: {0}")]
    GeometryOverlap(String),

    #[error("quadrature did not converge: estimated relative error {estimate:.3e} exceeds {tolerance:.1e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("integration unstable: {0}")]
    Unstable(String),

    #[error("filter noise distribution not converged: {0}")]
    NotConverged(String),

    #[error("series too short: {len} samples, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            detail: detail.into(),
        }
    }
}

/// Rejects NaN and infinities.
pub(crate) fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}

pub(crate) fn positive(what: &'static str, value: f64) -> Result<f64> {
    finite(what, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(what, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn non_negative(what: &'static str, value: f64) -> Result<f64> {
    finite(what, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(what, format!("must be >= 0, got {value}")))
    }
}

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// A physical quantity is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Refractive-index model undefined at the requested wavelength.
    #[error("index model undefined at {lambda_nm} nm: {reason}")]
    IndexUndefined { lambda_nm: f64, reason: String },

    /// Construction-time invariant violation, with every problem listed.
    #[error("invalid input: {}", .0.join("; "))]
    Invalid(Vec<String>),

    /// A distribution never drops below half maximum inside the grid.
    #[error("grid too small: {0}")]
    GridTooSmall(String),

    /// Grid resolution insufficient for the requested operation.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Conditional slice is numerically zero everywhere.
    #[error("degenerate slice: {0}")]
    DegenerateSlice(String),

    /// Numerical routine failed to converge or produced non-finite output.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Accidental subtraction applied to an already-corrected result.
    #[error("accidentals already subtracted from this scan")]
    AlreadyCorrected,

    /// Fit input rejected before optimization started.
    #[error("fit input error: {0}")]
    FitInput(String),
}

impl CoreError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }

    pub fn invalid_one(msg: impl Into<String>) -> Self {
        CoreError::Invalid(vec![msg.into()])
    }
}

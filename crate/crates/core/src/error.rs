use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative procedure exhausted its budget.
    #[error("convergence failure in {what}: {detail}")]
    Convergence { what: &'static str, detail: String },

    /// A contour node landed on (or next to) a singularity.
    #[error("pole proximity at xi = {re} + {im}i (|factor| = {magnitude:e})")]
    PoleProximity { re: f64, im: f64, magnitude: f64 },

    /// A quadrature invariant was violated (e.g. a spurious imaginary part).
    #[error("quadrature check failed: {0}")]
    Quadrature(String),

    /// Incompatible configurations were combined.
    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    /// A bracket or invariant that the mathematics guarantees did not hold.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical procedure rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::PoleProximity { .. } | Error::Quadrature(_) | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

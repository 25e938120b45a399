use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the open set an operation is defined on.
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// `phi` (or a quantile feeding it) produced a non-finite value.
    #[error("non-finite evaluation at index {index}: {context}")]
    Evaluation { index: usize, context: String },

    /// A finite-difference step could not be fitted inside (0, 1).
    #[error("x = {x} is too close to an endpoint of (0, 1) for a difference step")]
    Endpoint { x: f64 },

    /// Successive refinements did not settle. `trace` holds the sequence of
    /// estimates that was observed.
    #[error("divergence suspected: {context}")]
    Divergence { context: String, trace: Vec<f64> },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }
}

/// Checks `t` lies in the open unit interval.
pub(crate) fn check_unit_open(what: &'static str, t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(what, t, "(0, 1)"))
    }
}

use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge after level {level} (error estimate {estimate:e}, target {target:e})")]
    NonConvergence {
        level: u32,
        estimate: f64,
        target: f64,
    },

    #[error("initial data fail the compatibility check: {0}")]
    Validation(String),

    #[error("non-finite integrand value at {at}")]
    NonFinite { at: f64 },

    #[error("field does not provide the derivative of order {order:?}")]
    MissingDerivative { order: Vec<usize> },

    #[error("finite-difference scheme unstable: norm grew by factor {growth:e} at step {step}")]
    Unstable { step: usize, growth: f64 },

    #[error("singular tridiagonal system at row {row}")]
    SingularMatrix { row: usize },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

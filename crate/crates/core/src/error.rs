use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fractional order must be positive, got {0}")]
    NonPositiveOrder(f64),

    #[error("fractional order {0} is (numerically) an integer; IntegerOrder")]
    IntegerOrder(f64),

    #[error("gamma function has a pole at {0}")]
    Pole(f64),

    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    #[error("omega = {omega} lies outside the open transform domain ({lo}, {hi})")]
    Domain { omega: f64, lo: String, hi: String },

    #[error("adaptive quadrature did not reach tolerance {tol:e} within {panels} panels (last estimate change {achieved:e})")]
    ToleranceNotMet { tol: f64, achieved: f64, panels: usize },

    #[error("node computation failed to converge: {0}")]
    Convergence(String),

    #[error("no diffusive quadrature rule is available for transform {0}")]
    UnsupportedTransform(String),

    #[error("the fast path requires 0 < alpha < 1, got alpha = {0}")]
    OrderOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Range {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(detail: impl Into<String>) -> Self {
        Error::InvalidArgument(detail.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

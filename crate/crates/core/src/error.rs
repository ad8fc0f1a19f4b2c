use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {value} outside the domain ({reason})")]
    Domain {
        function: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{function}: result overflows at x = {x}")]
    Overflow { function: &'static str, x: f64 },

    #[error("{function}: series did not converge after {iterations} iterations")]
    SeriesNonConvergence {
        function: &'static str,
        iterations: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("spectrum of order {order} is not positive on the whole space: {positivity}")]
    NotPositiveEverywhere { order: usize, positivity: String },

    #[error("non-positive discrete symbol {value:e} at frequency {xi:?}")]
    NonPositiveSymbol { xi: Vec<f64>, value: f64 },

    #[error("positivity certificate failed: q_{index}({t}) = {value:e} < 0")]
    CertificateFailed { index: usize, t: f64, value: f64 },

    #[error("positivity certificate failed: fitted lower-bound constant {0:e} is not positive")]
    CertificateLowerBound(f64),

    #[error("downdate breakdown at pivot {pivot} (term order {order:?}, row {row}): {before:e} -> {after:e}")]
    DowndateBreakdown {
        pivot: usize,
        order: Option<usize>,
        row: usize,
        before: f64,
        after: f64,
    },

    #[error("non-positive pivot {value:e} at index {index} during factorization")]
    NonPositivePivot { index: usize, value: f64 },

    #[error("zero diagonal at index {0} in triangular solve")]
    ZeroDiagonal(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported boundary: {0}")]
    UnsupportedBoundary(String),
}

impl Error {
    /// True for failures that stem from the numbers rather than from the
    /// caller's configuration.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidParameters(_)
                | Error::InvalidGrid(_)
                | Error::UnsupportedBoundary(_)
                | Error::DimensionMismatch { .. }
                | Error::Domain { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Condition screening never returns an error for a violated condition;
/// violations are reported as verdicts. Errors are reserved for inputs the
/// routines cannot evaluate at all.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point is within {margin:.3e} of the domain boundary; the stencil needs {needed:.3e}")]
    TooCloseToBoundary { margin: f64, needed: f64 },

    #[error("derivative order {0} exceeds the supported maximum of 4")]
    OrderTooHigh(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("no start converged to a non-degenerate interior maximizer")]
    NoConvergentStart,

    #[error("maximizer is not unique: distinct stationary maxima differ by {distance:.3e} with values tied to {gap:.3e}")]
    AmbiguousMaximizer { distance: f64, gap: f64 },

    #[error("maximizer lies on the boundary of the contract box")]
    BoundaryMaximizer,

    #[error("b-segment residual {residual:.3e} at t = {t} exceeds the tolerance")]
    SegmentDefect { t: f64, residual: f64 },

    #[error("b-segment leaves the Y box at t = {0}")]
    SegmentExitsBox(f64),

    #[error("P0 is indefinite (min eigenvalue {0:.3e})")]
    IndefiniteP0(f64),

    #[error("degenerate neighbourhood: all neighbouring points coincide")]
    DegenerateNeighborhood,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

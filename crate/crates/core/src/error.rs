use thiserror::Error;

/// Errors raised by the geometric operations of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 1..={max})", max = crate::geometry::MAX_DIM)]
    UnsupportedDimension(usize),

    #[error("singular {what} at {point:?} (|det| = {det:e})")]
    Singular {
        what: &'static str,
        point: Vec<f64>,
        det: f64,
    },

    #[error("tangent vectors based at different points: {left:?} vs {right:?}")]
    BaseMismatch { left: Vec<f64>, right: Vec<f64> },

    #[error("invalid norm data: {0}")]
    InvalidNorm(String),

    #[error("integration blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("covering gap: point {point:?} is not covered by any member")]
    CoverageGap { point: Vec<f64> },

    #[error(
        "norm field is not compatible with the parallelism: F differs by {deviation:e} between {p:?} and {q:?}"
    )]
    Incompatible {
        p: Vec<f64>,
        q: Vec<f64>,
        deviation: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("expression parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

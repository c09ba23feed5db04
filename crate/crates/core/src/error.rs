use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The barrier sits on or inside the spectrum it is supposed to bound.
    #[error("barrier violation: barrier {barrier} vs spectral edge {edge} ({side})")]
    BarrierViolation {
        barrier: f64,
        edge: f64,
        side: BarrierSide,
    },

    #[error("potential budget exhausted: m(u) + alpha = {0} >= 1")]
    PotentialBudget(f64),

    #[error("rank-one update denominator {0:e} is numerically zero")]
    SingularUpdate(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample batch")]
    EmptyBatch,

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A deterministic guarantee failed numerically.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("search did not terminate after {0} steps")]
    NonTermination(u64),
}

/// Which side of the spectrum a barrier is meant to stay on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierSide {
    Below,
    Above,
}

impl std::fmt::Display for BarrierSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BarrierSide::Below => f.write_str("must stay below the spectrum"),
            BarrierSide::Above => f.write_str("must stay above the spectrum"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

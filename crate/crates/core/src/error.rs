use thiserror::Error;

use crate::space::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: {left} vs {right}")]
    Dimension {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid cell set: {0}")]
    InvalidCellSet(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Some cycle of the base map is too short to carry a tower of the requested height.
    #[error("aperiodicity violated: cycle of length {cycle_len} through cell {start} is shorter than tower height {height}")]
    Aperiodic {
        start: usize,
        cycle_len: usize,
        height: usize,
    },

    #[error("tower too coarse: achievable error mass {achieved} is not below {eps}")]
    TowerTooCoarse { achieved: Rational, eps: Rational },

    #[error("degenerate fiber: needs at least 2 fiber cells, got {0}")]
    DegenerateFiber(usize),

    #[error("structural precondition failed: {0}")]
    Structural(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exact arithmetic overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

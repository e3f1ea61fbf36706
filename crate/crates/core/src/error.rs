//! Crate-wide error type.

use crate::cs::SparseSolution;

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by simulation, recovery, and serialization routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or argument failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Two scene targets quantized onto the same grid cell.
    #[error("targets {first} and {second} collide on grid cell {cell:?}")]
    GridCollision {
        first: usize,
        second: usize,
        cell: (usize, usize),
    },

    /// Noise was requested relative to a signal with zero power.
    #[error("cannot scale noise to a zero-power signal")]
    ZeroSignal,

    /// Array or dimension mismatch between related inputs.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The least-squares subproblem on the selected support was singular.
    /// The partial solution computed so far is attached.
    #[error("rank-deficient support submatrix after {} selections", partial.support.len())]
    RankDeficient { partial: Box<SparseSolution> },

    /// An iterative solver's residual grew past the divergence guard.
    #[error("iteration diverged: residual grew to {ratio:.2}x the initial value")]
    Diverged { ratio: f64 },

    /// No consistent unfolding was found during ambiguity resolution.
    #[error("ambiguity resolution failed: no congruent unfolding within {max_unfold} folds")]
    AmbiguityUnresolved { max_unfold: usize },

    /// File or stream I/O failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A serialized document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

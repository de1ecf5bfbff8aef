use thiserror::Error;

use crate::minnorm::MinNormResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("the zero vector has no dual map direction")]
    ZeroVector,

    #[error("norm {0} is not strictly convex; the dual map is set-valued (use dual_face)")]
    NonUniqueDualMap(String),

    #[error("dual face would have {vertices} vertices (limit {limit})")]
    FaceTooLarge { vertices: u128, limit: u128 },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("function `{name}` expects {expected} parameter(s), got {got}")]
    BadArity {
        name: String,
        expected: String,
        got: usize,
    },

    /// The solver stopped without meeting its tolerance. The best iterate is attached.
    #[error("min-norm solver did not converge (gap {gap:.3e})")]
    ConvergenceFailure { gap: f64, best: Box<MinNormResult> },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(x: &[f64]) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite entry {v}")));
    }
    Ok(())
}

use thiserror::Error;

use crate::expr::ExprError;
use crate::linalg::LinalgError;

/// Errors raised by the analysis modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("state became non-finite or exceeded 1e12 at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("trajectory would need {samples} samples, above the cap of {cap}")]
    TooManySamples { samples: usize, cap: usize },
    #[error("history does not cover t = {t}")]
    HistoryGap { t: f64 },
    #[error("system is not linear")]
    NotLinear,
    #[error("matrix is singular: equilibria form a continuum")]
    ContinuumOfEquilibria,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("point is not an equilibrium (residual {residual:e})")]
    NotAnEquilibrium { residual: f64 },
    #[error("point is not a fixed point (residual {residual:e})")]
    NotAFixedPoint { residual: f64 },
    #[error("Lyapunov operator is singular: A and -A share an eigenvalue")]
    SingularLyapunovOperator,
    #[error("no region of attraction: the derivative is non-negative arbitrarily close to the origin")]
    NoRegion,
    #[error("trajectory norm vanishes on the fitting window")]
    ZeroTrajectory,
}

pub type Result<T> = std::result::Result<T, Error>;

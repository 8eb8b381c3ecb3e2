//! Stability analysis of continuous, delayed, periodic and discrete
//! dynamical systems.
//!
//! Systems are given by constant matrices or by parsed expressions in the
//! state variables `x1..xn` and time `t`. Verdicts that depend on sampling
//! (definiteness of nonlinear functions, attraction regions) say so in
//! their reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha;
pub mod autonomous;
pub mod discrete;
pub mod error;
pub mod expr;
pub mod floquet;
pub mod linalg;
pub mod lyapunov;
pub mod odeint;
pub mod scan;

pub use alpha::{AlphaCertificate, CertificateRoute, DelaySystem, EnvelopeFit};
pub use autonomous::{CriticalPointKind, Equilibrium, StabilityKind, StabilityVerdict};
pub use discrete::{DiscreteSystem, DiscreteVerdict, Orbit};
pub use error::{Error, Result};
pub use expr::{EvalContext, Expr, ExprError, ParseOptions};
pub use floquet::{FloquetReport, PeriodicSystem, PeriodicVerdict};
pub use linalg::{ComplexScalar, Definiteness, DefinitenessVerdict, LinalgError, Matrix};
pub use lyapunov::{CandidateV, Conclusion, LyapunovReport};
pub use odeint::{ExprMatrix, HistoryFn, MatrixFn, SystemDef, Trajectory};
pub use scan::ScanConfig;

//! Exponential envelopes and α-stability certificates for linear
//! multi-delay systems `ẋ = A0(t)x + Σ Ai(t) x(t - hi)`.
//!
//! Matrix solutions `P(t)` of the Riccati and Lyapunov equations are never
//! solved for in the time-varying case; they are supplied and verified by
//! their pointwise residual on a time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Definiteness, Matrix};
use crate::lyapunov;
use crate::odeint::{self, HistoryFn, MatrixFn, Rhs, SystemDef, Trajectory};

/// A validated linear system with at least one delayed term.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    sys: SystemDef,
}

impl DelaySystem {
    pub fn new(sys: SystemDef) -> Result<Self> {
        if !sys.is_linear() {
            return Err(Error::NotLinear);
        }
        if matches!(sys.rhs, Rhs::LinearConstant { input: Some(_), .. }) {
            return Err(Error::InvalidInput("delay systems must be homogeneous".into()));
        }
        if sys.delays.is_empty() {
            return Err(Error::InvalidInput(
                "a delay system needs at least one delayed term".into(),
            ));
        }
        Ok(DelaySystem { sys })
    }

    pub fn system(&self) -> &SystemDef {
        &self.sys
    }

    pub fn dim(&self) -> usize {
        self.sys.dim
    }

    /// Number of delayed terms.
    pub fn m(&self) -> usize {
        self.sys.delays.len()
    }

    /// Largest lag.
    pub fn h(&self) -> f64 {
        self.sys.max_lag()
    }

    pub fn lags(&self) -> Vec<f64> {
        self.sys.delays.iter().map(|d| d.lag).collect()
    }

    pub fn a0(&self, t: f64) -> Result<Matrix> {
        self.sys.linear_matrix_at(t)
    }

    pub fn a(&self, i: usize, t: f64) -> Result<Matrix> {
        self.sys.delays[i].coeff.at(t)
    }

    pub fn is_constant(&self) -> bool {
        self.sys.is_autonomous()
    }
}

/// `A0 + αI` and `e^{α hi} Ai` at time `t`.
pub fn shifted_matrices(sys: &DelaySystem, alpha: f64, t: f64) -> Result<(Matrix, Vec<Matrix>)> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be non-negative, got {alpha}")));
    }
    let n = sys.dim();
    let a0 = &sys.a0(t)? + &Matrix::identity(n).scale(alpha);
    let ai = sys
        .system()
        .delays
        .iter()
        .map(|d| Ok(d.coeff.at(t)?.scale((alpha * d.lag).exp())))
        .collect::<Result<Vec<_>>>()?;
    Ok((a0, ai))
}

fn p_at(p: &MatrixFn, n: usize, t: f64) -> Result<Matrix> {
    let m = p.at(t)?;
    if m.rows() != n || m.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{}, system dimension is {n}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

/// Central difference of `P` at `t`; zero for constant `P`.
fn p_dot(p: &MatrixFn, t: f64) -> Result<Matrix> {
    if p.is_constant() {
        let (r, c) = p.dims();
        return Ok(Matrix::zeros(r, c));
    }
    let h = 1e-5 * t.abs().max(1.0);
    Ok((&p.at(t + h)? - &p.at(t - h)?).scale(0.5 / h))
}

/// Sup over `times` of the Frobenius norm of
/// `Ṗ + A0αᵀ(P+I) + (P+I)A0α + Σ (P+I) Aiα Aiαᵀ (P+I) + mI`.
pub fn rde_residual(sys: &DelaySystem, alpha: f64, p: &MatrixFn, times: &[f64]) -> Result<f64> {
    let n = sys.dim();
    let id = Matrix::identity(n);
    let mut sup: f64 = 0.0;
    for &t in times {
        let pt = p_at(p, n, t)?;
        let pi = &pt + &id;
        let (a0, ai) = shifted_matrices(sys, alpha, t)?;
        let mut r = &(&p_dot(p, t)? + &(&a0.transpose() * &pi)) + &(&pi * &a0);
        for a in &ai {
            r = &r + &(&(&pi * a) * &(&a.transpose() * &pi));
        }
        r = &r + &id.scale(sys.m() as f64);
        sup = sup.max(r.frobenius_norm());
    }
    Ok(sup)
}

/// Sup over `times` of the Frobenius norm of `Ṗ + A0ᵀP + PA0 + mI`.
pub fn delay_lyapunov_residual(sys: &DelaySystem, p: &MatrixFn, times: &[f64]) -> Result<f64> {
    let n = sys.dim();
    let mut sup: f64 = 0.0;
    for &t in times {
        let pt = p_at(p, n, t)?;
        let a0 = sys.a0(t)?;
        let r =
            &(&(&p_dot(p, t)? + &(&a0.transpose() * &pt)) + &(&pt * &a0)) + &Matrix::identity(n).scale(sys.m() as f64);
        sup = sup.max(r.frobenius_norm());
    }
    Ok(sup)
}

/// Solves `A0ᵀP + PA0 + mI = 0`.
pub fn solve_delay_lyapunov(a0: &Matrix, m: usize) -> Result<Matrix> {
    lyapunov::solve_lyapunov(a0, &Matrix::identity(a0.rows()).scale(m as f64))
}

/// Left-hand side `η + α‖Pt‖ + (m/2) e^{2αh} ‖Pt‖² ‖A‖²` of the rate inequality.
pub fn rate_inequality_lhs(eta: f64, p_norm: f64, a_norm_sq: f64, m: usize, h: f64, alpha: f64) -> f64 {
    eta + alpha * p_norm + 0.5 * m as f64 * (2.0 * alpha * h).exp() * p_norm * p_norm * a_norm_sq
}

/// Largest `α ∈ (0, 100]` satisfying the rate inequality, by bisection to
/// 1e-9. `None` when the inequality fails already at `α = 0`.
pub fn max_alpha(eta: f64, p_norm: f64, a_norm_sq: f64, m: usize, h: f64) -> Option<f64> {
    let lhs = |a: f64| rate_inequality_lhs(eta, p_norm, a_norm_sq, m, h, a);
    if lhs(0.0) >= 0.0 {
        return None;
    }
    if lhs(100.0) <= 0.0 {
        return Some(100.0);
    }
    let (mut lo, mut hi) = (0.0, 100.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Scalar inputs of the rate inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    /// Sup of the matrix measure of `A0(t)`.
    pub eta: f64,
    /// Sup of `‖P(t) + I‖`.
    pub p_norm: f64,
    /// Sup of `max_i ‖Ai(t)‖²`.
    pub a_norm_sq: f64,
    pub m: usize,
    pub h: f64,
}

impl RateInputs {
    pub fn lhs(&self, alpha: f64) -> f64 {
        rate_inequality_lhs(self.eta, self.p_norm, self.a_norm_sq, self.m, self.h, alpha)
    }

    pub fn max_alpha(&self) -> Option<f64> {
        max_alpha(self.eta, self.p_norm, self.a_norm_sq, self.m, self.h)
    }
}

/// Evaluates the rate-inequality inputs as sups over `times`.
pub fn rate_inputs(sys: &DelaySystem, p: &MatrixFn, times: &[f64]) -> Result<RateInputs> {
    let n = sys.dim();
    let id = Matrix::identity(n);
    let mut eta = f64::NEG_INFINITY;
    let mut p_norm: f64 = 0.0;
    let mut a_norm_sq: f64 = 0.0;
    for &t in times {
        eta = eta.max(linalg::matrix_measure(&sys.a0(t)?)?);
        p_norm = p_norm.max(linalg::spectral_norm(&(&p_at(p, n, t)? + &id))?);
        for i in 0..sys.m() {
            let s = linalg::spectral_norm(&sys.a(i, t)?)?;
            a_norm_sq = a_norm_sq.max(s * s);
        }
    }
    Ok(RateInputs {
        eta,
        p_norm,
        a_norm_sq,
        m: sys.m(),
        h: sys.h(),
    })
}

/// An exponential bound `‖x(t)‖ ≤ c e^{-λt}` fitted to a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c: f64,
    pub lambda: f64,
    pub verified: bool,
    pub window: [f64; 2],
    /// Decay rate fitted on the second half of the window alone.
    pub second_half_rate: f64,
}

/// Start of the default fitting window: drops the first 10% of the span.
pub fn default_window_start(traj: &Trajectory) -> f64 {
    let t0 = traj.times.first().copied().unwrap_or(0.0);
    let t1 = traj.times.last().copied().unwrap_or(0.0);
    t0 + 0.1 * (t1 - t0)
}

fn window_logs(traj: &Trajectory, t_lo: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    for (x, &t) in traj.states.iter().zip(&traj.times) {
        if t + 1e-12 < t_lo {
            continue;
        }
        let n = linalg::vec_norm(x);
        if !(n > 0.0) {
            return Err(Error::ZeroTrajectory);
        }
        ts.push(t);
        ls.push(n.ln());
    }
    if ts.len() < 4 {
        return Err(Error::InvalidInput("fitting window holds fewer than 4 samples".into()));
    }
    Ok((ts, ls))
}

fn ls_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        num += (t - tm) * (y - ym);
        den += (t - tm) * (t - tm);
    }
    num / den
}

/// Fits `λ` as minus the least-squares slope of `log‖x(t)‖` on
/// `[t_lo, end]` and sets `c` to the smallest constant making the bound hold
/// at every sample. The fit counts as verified only for a positive rate that
/// the second half of the window reproduces to within 25%.
pub fn fit_envelope(traj: &Trajectory, t_lo: f64) -> Result<EnvelopeFit> {
    let (ts, ls) = window_logs(traj, t_lo)?;
    let lambda = -ls_slope(&ts, &ls);
    let mid = 0.5 * (ts[0] + ts[ts.len() - 1]);
    let k = ts.partition_point(|&t| t < mid).min(ts.len() - 4);
    let second_half_rate = -ls_slope(&ts[k..], &ls[k..]);
    let c = ts
        .iter()
        .zip(&ls)
        .map(|(t, l)| (l + lambda * t).exp())
        .fold(0.0, f64::max);
    let verified = lambda > 0.0 && second_half_rate >= 0.75 * lambda;
    Ok(EnvelopeFit {
        c,
        lambda,
        verified,
        window: [ts[0], ts[ts.len() - 1]],
        second_half_rate,
    })
}

/// Tests a prescribed rate: `c` is taken from the first half of the window
/// and must bound the second half too.
pub fn check_rate(traj: &Trajectory, rate: f64, t_lo: f64) -> Result<EnvelopeFit> {
    let (ts, ls) = window_logs(traj, t_lo)?;
    let mid = 0.5 * (ts[0] + ts[ts.len() - 1]);
    let k = ts.partition_point(|&t| t < mid).clamp(1, ts.len() - 1);
    let c = ts[..k]
        .iter()
        .zip(&ls[..k])
        .map(|(t, l)| (l + rate * t).exp())
        .fold(0.0, f64::max);
    let verified = ts
        .iter()
        .zip(&ls)
        .all(|(t, l)| l.exp() <= c * (-rate * t).exp() * (1.0 + 1e-9))
        && ls[ls.len() - 1] < ls[0];
    Ok(EnvelopeFit {
        c,
        lambda: rate,
        verified,
        window: [ts[0], ts[ts.len() - 1]],
        second_half_rate: -ls_slope(&ts[k.min(ts.len() - 2)..], &ls[k.min(ts.len() - 2)..]),
    })
}

/// Which sufficient condition a certificate rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateRoute {
    /// Supplied `P(t) ≥ 0` solving the Riccati differential equation.
    Riccati,
    /// Supplied constant `P ≥ 0` solving the algebraic Riccati equation.
    AlgebraicRiccati,
    /// `P ≥ 0` solving the delay Lyapunov equation (solved when `A0` is
    /// constant and no `P` is given), plus the rate inequality.
    DelayLyapunov,
}

/// Settings of a certification run.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    /// Time grid for residual and sup evaluations.
    pub grid_t1: f64,
    pub grid_samples: usize,
    pub residual_tol: f64,
    /// Trajectory cross-check; skipped when `horizon` is zero.
    pub horizon: f64,
    pub step: f64,
    /// Initial function; `φ ≡ 1` when absent.
    pub history: Option<HistoryFn>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            grid_t1: 5.0,
            grid_samples: 501,
            residual_tol: 1e-6,
            horizon: 20.0,
            step: 1e-3,
            history: None,
        }
    }
}

/// A sample of `P(t)` for the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PSample {
    pub t: f64,
    pub p: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCertificate {
    pub alpha: f64,
    pub route: CertificateRoute,
    pub p: Vec<PSample>,
    pub residual: f64,
    pub residual_tol: f64,
    pub p_semidefinite: bool,
    pub rate_inputs: Option<RateInputs>,
    /// Rate-inequality left-hand side at `alpha` (delay Lyapunov route).
    pub inequality_margin: Option<f64>,
    pub alpha_max: Option<f64>,
    pub trajectory_check: Option<EnvelopeFit>,
    pub valid: bool,
    pub notes: Vec<String>,
}

fn grid(constant: bool, opts: &CertifyOptions) -> Vec<f64> {
    if constant {
        vec![0.0]
    } else {
        crate::scan::time_samples(0.0, opts.grid_t1, opts.grid_samples)
    }
}

/// Assembles an α-stability certificate along the chosen route.
pub fn certify(
    sys: &DelaySystem,
    alpha: f64,
    route: CertificateRoute,
    p: Option<&MatrixFn>,
    opts: &CertifyOptions,
) -> Result<AlphaCertificate> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let n = sys.dim();
    let mut notes = Vec::new();
    let p_fn = match (route, p) {
        (_, Some(p)) => p.clone(),
        (CertificateRoute::DelayLyapunov, None) => {
            if !sys.is_constant() {
                return Err(Error::InvalidInput(
                    "time-varying coefficients need a supplied P(t)".into(),
                ));
            }
            notes.push("P solved from the algebraic delay Lyapunov equation".into());
            MatrixFn::Constant(solve_delay_lyapunov(&sys.a0(0.0)?, sys.m())?)
        }
        (_, None) => return Err(Error::InvalidInput("this route needs a supplied P".into())),
    };
    if route == CertificateRoute::AlgebraicRiccati && !(sys.is_constant() && p_fn.is_constant()) {
        return Err(Error::InvalidInput(
            "the algebraic Riccati route needs constant coefficients and constant P".into(),
        ));
    }
    let constant = sys.is_constant() && p_fn.is_constant();
    let times = grid(constant, opts);

    let residual = match route {
        CertificateRoute::Riccati | CertificateRoute::AlgebraicRiccati => rde_residual(sys, alpha, &p_fn, &times)?,
        CertificateRoute::DelayLyapunov => delay_lyapunov_residual(sys, &p_fn, &times)?,
    };
    let mut p_semidefinite = true;
    for &t in &times {
        let pt = p_at(&p_fn, n, t)?;
        let v = linalg::definiteness(&pt, linalg::DEFAULT_TOL)?;
        if !v.kind.is_positive_semidefinite() || v.kind == Definiteness::Indefinite {
            p_semidefinite = false;
        }
    }
    let (rate_inputs, inequality_margin, alpha_max) = if route == CertificateRoute::DelayLyapunov {
        let ri = rate_inputs(sys, &p_fn, &times)?;
        (Some(ri), Some(ri.lhs(alpha)), ri.max_alpha())
    } else {
        (None, None, None)
    };
    let mut valid = residual < opts.residual_tol && p_semidefinite;
    if let Some(m) = inequality_margin {
        valid &= m <= 0.0;
    }

    let trajectory_check = if opts.horizon > 0.0 {
        let history = opts
            .history
            .clone()
            .unwrap_or_else(|| HistoryFn::constant(vec![1.0; n], sys.h()));
        match odeint::integrate_dde(sys.system(), &history, opts.horizon, opts.step) {
            Ok(traj) => Some(check_rate(&traj, alpha, default_window_start(&traj))?),
            Err(Error::NonFiniteState { t }) => {
                notes.push(format!("trajectory cross-check skipped: simulation escaped at t = {t}"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    if !constant {
        notes.push(format!(
            "residual and sups taken over {} grid times in [0, {}]",
            times.len(),
            opts.grid_t1
        ));
    }
    let record: Vec<PSample> = if constant {
        vec![PSample {
            t: 0.0,
            p: p_at(&p_fn, n, 0.0)?,
        }]
    } else {
        crate::scan::time_samples(0.0, opts.grid_t1, 6)
            .into_iter()
            .map(|t| {
                Ok(PSample {
                    t,
                    p: p_at(&p_fn, n, t)?,
                })
            })
            .collect::<Result<_>>()?
    };
    Ok(AlphaCertificate {
        alpha,
        route,
        p: record,
        residual,
        residual_tol: opts.residual_tol,
        p_semidefinite,
        rate_inputs,
        inequality_margin,
        alpha_max,
        trajectory_check,
        valid,
        notes,
    })
}

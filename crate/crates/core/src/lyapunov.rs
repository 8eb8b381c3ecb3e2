//! Lyapunov's direct method.
//!
//! Candidate functions are user-supplied expressions. Every definiteness
//! claim about them is a statement about deterministic samples of a ball
//! (and of a time window for time-varying problems): a single violating
//! sample refutes a property, while passing samples only support it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, EvalContext, Expr, ParseOptions};
use crate::linalg::{self, Definiteness, Matrix};
use crate::odeint::{self, SystemDef};
use crate::scan::{self, ScanConfig, SignClass, SignSummary, RATIO_BAND};

/// Residual of `f(0, t)` below which the origin counts as an equilibrium.
pub const ORIGIN_TOL: f64 = 1e-9;

/// A candidate function `V(x, t)` with its finite-difference step.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateV {
    pub expr: Expr,
    /// Relative step for central differences.
    pub step: f64,
}

impl CandidateV {
    pub fn new(expr: Expr) -> Self {
        CandidateV { expr, step: 1e-5 }
    }

    pub fn parse(text: &str, opts: &ParseOptions) -> Result<Self> {
        Ok(Self::new(expr::parse_with(text, opts)?))
    }

    pub fn depends_on_time(&self) -> bool {
        self.expr.depends_on_time()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(self.expr.eval(&EvalContext::new(x, t))?)
    }

    /// Central-difference gradient in `x` and partial derivative in `t`
    /// (zero when `V` does not mention time).
    pub fn gradient(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
        let (grad, dt, _) = self.gradient_with_noise(x, t)?;
        Ok((grad, dt))
    }

    /// Gradient plus a bound on the roundoff in each spatial component.
    fn gradient_with_noise(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, f64, f64)> {
        let h = self.step * linalg::vec_inf_norm(x).max(1e-6);
        let mut noise: f64 = 0.0;
        let mut xp = x.to_vec();
        let mut grad = Vec::with_capacity(x.len());
        for j in 0..x.len() {
            xp[j] = x[j] + h;
            let vp = self.eval(&xp, t)?;
            xp[j] = x[j] - h;
            let vm = self.eval(&xp, t)?;
            xp[j] = x[j];
            noise = noise.max(f64::EPSILON * (vp.abs() + vm.abs()) / (2.0 * h));
            grad.push((vp - vm) / (2.0 * h));
        }
        let dt = if self.depends_on_time() {
            let ht = self.step * t.abs().max(1.0);
            (self.eval(x, t + ht)? - self.eval(x, t - ht)?) / (2.0 * ht)
        } else {
            0.0
        };
        Ok((grad, dt, noise))
    }
}

/// `V̇` at a point together with the sum of magnitudes of its terms, which
/// serves as the scale for sign decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdotSample {
    pub value: f64,
    pub scale: f64,
}

fn check_dims(sys: &SystemDef) -> Result<()> {
    if !sys.delays.is_empty() {
        return Err(Error::InvalidInput(
            "Lyapunov analysis applies to systems without delays".into(),
        ));
    }
    Ok(())
}

/// `V̇ = ∇V · f(x, t) + ∂V/∂t` with finite-difference derivatives. Values
/// within the differencing roundoff are reported as exactly zero.
pub fn vdot(sys: &SystemDef, v: &CandidateV, x: &[f64], t: f64) -> Result<VdotSample> {
    let f = sys.eval_rhs(x, t)?;
    let (grad, dt, noise) = v.gradient_with_noise(x, t)?;
    let mut value = dt;
    let mut scale = dt.abs();
    for (g, fi) in grad.iter().zip(&f) {
        value += g * fi;
        scale += (g * fi).abs();
    }
    let floor = 16.0 * noise * f.iter().map(|v| v.abs()).sum::<f64>();
    if value.abs() <= floor {
        value = 0.0;
    }
    Ok(VdotSample { value, scale })
}

/// Evaluator `(x, t) ↦ V̇(x, t)` along the system.
pub fn vdot_along<'a>(sys: &'a SystemDef, v: &'a CandidateV) -> impl Fn(&[f64], f64) -> Result<f64> + 'a {
    move |x, t| Ok(vdot(sys, v, x, t)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VdotVerdict {
    NegativeDefinite,
    NegativeSemidefinite,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Conclusion {
    NoConclusion,
    Stable,
    UniformlyStable,
    UniformlyAsymptoticallyStable,
    ExponentiallyStable,
}

/// Definiteness of a sampled function, with the extreme samples as witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledDefiniteness {
    pub kind: Definiteness,
    pub witness: SignSummary,
    pub notes: Vec<String>,
}

/// Comparison constants `K1‖x‖² ≤ V ≤ K2‖x‖²`, `V̇ ≤ -K3‖x‖²` on samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBounds {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Fitted log-log exponents of min V, max V and min(-V̇) against ‖x‖.
    pub exponents: [f64; 3],
    pub holds: bool,
}

/// Quadratic part of `-V̇` at one time, recovered by polarization; its
/// leading minors witness a positive definite lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticWitness {
    pub t: f64,
    pub matrix: Matrix,
    pub minors: Vec<f64>,
}

fn quadratic_part(sys: &SystemDef, v: &CandidateV, t: f64, rho: f64) -> Result<QuadraticWitness> {
    let n = sys.dim;
    let q = |x: &[f64]| -> Result<f64> { Ok(-vdot(sys, v, x, t)?.value) };
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = rho;
        e
    };
    let diag: Vec<f64> = (0..n).map(|i| q(&unit(i))).collect::<Result<_>>()?;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i] / (rho * rho);
        for j in i + 1..n {
            let mut e = unit(i);
            e[j] = rho;
            let w = (q(&e)? - diag[i] - diag[j]) / (2.0 * rho * rho);
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
    }
    let minors = linalg::principal_minors(&m)?;
    Ok(QuadraticWitness { t, matrix: m, minors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub v_zero_at_origin: bool,
    pub v_definite: SampledDefiniteness,
    pub vdot_verdict: VdotVerdict,
    pub vdot_witness: SignSummary,
    pub decrescent: bool,
    pub radially_unbounded: bool,
    pub power_bounds: Option<PowerBounds>,
    /// Quadratic part of `-V̇` at the scan start, when `V̇` is negative definite.
    pub vdot_quadratic: Option<QuadraticWitness>,
    pub conclusion: Conclusion,
    /// Every conclusion the findings support, weakest first.
    pub established: Vec<Conclusion>,
    pub theorem_invoked: String,
    /// True when the problem was treated as time-invariant.
    pub autonomous: bool,
    pub scan: ScanConfig,
    pub notes: Vec<String>,
}

fn check_origin(sys: &SystemDef, times: &[f64]) -> Result<()> {
    let zero = vec![0.0; sys.dim];
    for &t in times {
        let residual = linalg::vec_norm(&sys.eval_rhs(&zero, t)?);
        if residual >= ORIGIN_TOL {
            return Err(Error::NotAnEquilibrium { residual });
        }
    }
    Ok(())
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Per-time infimum of `g(x, t)` over the points, split into halves of the
/// time window. Returns (inf over first half, inf over second half).
fn half_infima(per_time: &[f64]) -> (f64, f64) {
    let mid = per_time.len() / 2;
    let a = per_time[..mid.max(1)].iter().copied().fold(f64::INFINITY, f64::min);
    let b = per_time[mid..].iter().copied().fold(f64::INFINITY, f64::min);
    (a, b)
}

fn half_suprema(per_time: &[f64]) -> (f64, f64) {
    let mid = per_time.len() / 2;
    let a = per_time[..mid.max(1)].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let b = per_time[mid..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (a, b)
}

fn per_time_extremes<F>(g: F, points: &[Vec<f64>], times: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64], f64) -> Result<f64>,
{
    let mut mins = Vec::with_capacity(times.len());
    let mut maxs = Vec::with_capacity(times.len());
    for &t in times {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in points {
            let v = g(x, t)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        mins.push(lo);
        maxs.push(hi);
    }
    Ok((mins, maxs))
}

fn definiteness_of(class: SignClass) -> Definiteness {
    match class {
        SignClass::Positive => Definiteness::PositiveDefinite,
        SignClass::NonNegative | SignClass::Zero => Definiteness::PositiveSemidefinite,
        SignClass::Negative => Definiteness::NegativeDefinite,
        SignClass::NonPositive => Definiteness::NegativeSemidefinite,
        SignClass::Mixed => Definiteness::Indefinite,
    }
}

/// Checks `V(Rd)` grows without bound along sampled rays.
fn radial_probe(v: &CandidateV, dim: usize, times: &[f64]) -> bool {
    let dirs = scan::sphere_directions(dim, 64);
    let probe_times: Vec<f64> = if times.len() > 16 {
        times.iter().step_by(times.len() / 16).copied().collect()
    } else {
        times.to_vec()
    };
    for d in &dirs {
        for &t in &probe_times {
            let at = |r: f64| {
                let x: Vec<f64> = d.iter().map(|c| c * r).collect();
                v.eval(&x, t)
            };
            let vals: Vec<f64> = match [10.0, 100.0, 1000.0].iter().map(|&r| at(r)).collect() {
                Ok(v) => v,
                Err(_) => return false,
            };
            if !(vals[0] < vals[1] && vals[1] < vals[2] && vals[2] > 10.0 * vals[0].abs()) {
                return false;
            }
        }
    }
    true
}

fn loglog_exponent(small: f64, large: f64, ratio: f64) -> f64 {
    if small > 0.0 && large > 0.0 {
        (large / small).ln() / ratio.ln()
    } else {
        f64::NAN
    }
}

/// Fits `V ~ ‖x‖^p` and `-V̇ ~ ‖x‖^p` along rays and tests `p = 2`.
fn power_bounds(sys: &SystemDef, v: &CandidateV, cfg: &ScanConfig, times: &[f64]) -> Result<PowerBounds> {
    let dirs = scan::sphere_directions(sys.dim, 64);
    let (r_hi, r_lo) = (cfg.radius, cfg.radius * 1e-2);
    let extremes = |r: f64| -> Result<(f64, f64, f64)> {
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        let mut wmin = f64::INFINITY;
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|c| c * r).collect();
            for &t in times {
                let vv = v.eval(&x, t)?;
                let w = -vdot(sys, v, &x, t)?.value;
                vmin = vmin.min(vv);
                vmax = vmax.max(vv);
                wmin = wmin.min(w);
            }
        }
        Ok((vmin, vmax, wmin))
    };
    let hi = extremes(r_hi)?;
    let lo = extremes(r_lo)?;
    let ratio = r_hi / r_lo;
    let exponents = [
        loglog_exponent(lo.0, hi.0, ratio),
        loglog_exponent(lo.1, hi.1, ratio),
        loglog_exponent(lo.2, hi.2, ratio),
    ];
    let k1 = (lo.0 / (r_lo * r_lo)).min(hi.0 / (r_hi * r_hi));
    let k2 = (lo.1 / (r_lo * r_lo)).max(hi.1 / (r_hi * r_hi));
    let k3 = (lo.2 / (r_lo * r_lo)).min(hi.2 / (r_hi * r_hi));
    let holds = k1 > 0.0 && k2.is_finite() && k3 > 0.0 && exponents.iter().all(|p| (1.75..=2.25).contains(p));
    Ok(PowerBounds {
        k1,
        k2,
        k3,
        exponents,
        holds,
    })
}

/// Simulates a few trajectories and reports whether `V̇` vanishes
/// identically along any of them. A heuristic, never a proof.
fn invariance_note(sys: &SystemDef, v: &CandidateV, cfg: &ScanConfig) -> Option<String> {
    let starts = scan::ball_points(sys.dim, 0.5 * cfg.radius, 8);
    let mut identically_zero = 0;
    for x0 in &starts {
        let tr = match odeint::integrate(sys, x0, cfg.t0, cfg.t0 + 20.0, 1e-2) {
            Ok(tr) => tr,
            Err(_) => return None,
        };
        let mut all_zero = true;
        for (x, &t) in tr.states.iter().zip(&tr.times) {
            let s = vdot(sys, v, x, t).ok()?;
            let r = if s.scale > 0.0 { s.value / s.scale } else { 0.0 };
            if r < -RATIO_BAND {
                all_zero = false;
                break;
            }
        }
        if all_zero {
            identically_zero += 1;
        }
    }
    Some(if identically_zero == 0 {
        format!(
            "heuristic: the derivative does not vanish identically along {} simulated trajectories, \
             which suggests asymptotic stability by the invariance principle (not established)",
            starts.len()
        )
    } else {
        format!(
            "heuristic: the derivative vanishes identically along {identically_zero} of {} simulated trajectories",
            starts.len()
        )
    })
}

/// Checks a candidate Lyapunov function on sampled points of a ball and
/// time window, and draws the strongest conclusion the findings support.
pub fn check_candidate(sys: &SystemDef, v: &CandidateV, cfg: &ScanConfig) -> Result<LyapunovReport> {
    check_dims(sys)?;
    if v.expr.max_state_index() > sys.dim {
        return Err(Error::DimensionMismatch(
            "candidate mentions a state beyond the system dimension".into(),
        ));
    }
    let autonomous = sys.is_autonomous() && !v.depends_on_time();
    let times = cfg.times(!autonomous);
    check_origin(sys, &times)?;
    let points = cfg.points(sys.dim);
    let mut notes = vec![format!(
        "definiteness verdicts hold on {} sampled points of the ball of radius {}{}",
        points.len(),
        cfg.radius,
        if autonomous {
            String::new()
        } else {
            format!(" at {} times in [{}, {}]", times.len(), cfg.t0, cfg.t0 + cfg.t_span)
        }
    )];

    let zero = vec![0.0; sys.dim];
    let mut v_zero_at_origin = true;
    for &t in &times {
        if v.eval(&zero, t)?.abs() > 1e-12 {
            v_zero_at_origin = false;
        }
    }
    if !v_zero_at_origin {
        notes.push("candidate does not vanish at the origin".into());
    }

    // V against ‖x‖².
    let v_ratio = |x: &[f64], t: f64| -> Result<(f64, f64)> { Ok((v.eval(x, t)?, sq(x))) };
    let v_summary = scan::sign_scan(&v_ratio, &points, &times, cfg.refine)?;
    let mut v_kind = definiteness_of(v_summary.class());
    let mut v_notes = Vec::new();
    let (v_inf, v_sup) = if autonomous {
        (Vec::new(), Vec::new())
    } else {
        per_time_extremes(|x, t| Ok(v.eval(x, t)? / sq(x)), &points, &times)?
    };
    if !autonomous && v_kind == Definiteness::PositiveDefinite {
        let (first, second) = half_infima(&v_inf);
        if second < 0.5 * first {
            v_kind = Definiteness::PositiveSemidefinite;
            v_notes.push(format!(
                "lower bound decays over the time window (inf V/|x|^2: {first:.3e} then {second:.3e}); \
                 no time-independent positive definite minorant"
            ));
        }
    }
    if !v_zero_at_origin {
        v_kind = Definiteness::Indefinite;
    }

    // V̇ on its own scale.
    let vd = |x: &[f64], t: f64| -> Result<(f64, f64)> {
        let s = vdot(sys, v, x, t)?;
        Ok((s.value, s.scale))
    };
    let vdot_summary = scan::sign_scan(&vd, &points, &times, cfg.refine)?;
    let mut vdot_verdict = match vdot_summary.class() {
        SignClass::Negative => VdotVerdict::NegativeDefinite,
        SignClass::NonPositive | SignClass::Zero => VdotVerdict::NegativeSemidefinite,
        _ => VdotVerdict::Indefinite,
    };
    if !autonomous && vdot_verdict == VdotVerdict::NegativeDefinite {
        let (w_inf, _) = per_time_extremes(|x, t| Ok(-vdot(sys, v, x, t)?.value / sq(x)), &points, &times)?;
        let (first, second) = half_infima(&w_inf);
        if second < 0.5 * first {
            vdot_verdict = VdotVerdict::NegativeSemidefinite;
            notes.push(format!(
                "decay bound of the derivative fades over the time window \
                 (inf -dV/dt/|x|^2: {first:.3e} then {second:.3e})"
            ));
        }
    }

    let decrescent = if !v.depends_on_time() {
        true
    } else {
        let (first, second) = half_suprema(&v_sup);
        let ok = first.is_finite() && second.is_finite() && second <= 1.25 * first;
        if !ok {
            notes.push(format!(
                "upper bound grows over the time window (sup V/|x|^2: {first:.3e} then {second:.3e})"
            ));
        }
        ok
    };
    let radially_unbounded = radial_probe(v, sys.dim, &times);
    let vdot_quadratic = if vdot_verdict == VdotVerdict::NegativeDefinite {
        Some(quadratic_part(sys, v, cfg.t0, 0.1 * cfg.radius)?)
    } else {
        None
    };

    let v_pd = v_kind == Definiteness::PositiveDefinite;
    let mut established = Vec::new();
    let nsd = matches!(
        vdot_verdict,
        VdotVerdict::NegativeDefinite | VdotVerdict::NegativeSemidefinite
    );
    let mut power = None;
    if v_pd && nsd {
        established.push(Conclusion::Stable);
        if decrescent {
            established.push(Conclusion::UniformlyStable);
        }
        if decrescent && vdot_verdict == VdotVerdict::NegativeDefinite {
            established.push(Conclusion::UniformlyAsymptoticallyStable);
            let pb = power_bounds(sys, v, cfg, &times)?;
            if pb.holds {
                established.push(Conclusion::ExponentiallyStable);
            }
            power = Some(pb);
        }
    }
    if autonomous {
        // Time-invariant problems: stability is automatically uniform, so
        // the uniform-stability rung adds nothing.
        established.retain(|c| *c != Conclusion::UniformlyStable);
    }
    let conclusion = established.last().copied().unwrap_or(Conclusion::NoConclusion);
    let theorem_invoked = match conclusion {
        Conclusion::NoConclusion => "none: the candidate fails the sufficient conditions",
        Conclusion::Stable => "Lyapunov stability theorem",
        Conclusion::UniformlyStable => "Lyapunov stability theorem (decrescent case: uniform)",
        Conclusion::UniformlyAsymptoticallyStable => "Lyapunov asymptotic stability theorem",
        Conclusion::ExponentiallyStable => "Lyapunov exponential stability theorem (p = 2)",
    }
    .to_string();
    if conclusion == Conclusion::NoConclusion {
        notes.push("failure of this candidate does not imply instability".into());
    }
    if autonomous && conclusion == Conclusion::Stable {
        if let Some(n) = invariance_note(sys, v, cfg) {
            notes.push(n);
        }
    }
    if radially_unbounded && conclusion >= Conclusion::UniformlyAsymptoticallyStable {
        notes.push("candidate is radially unbounded along probed rays; the conclusion is global if the sign conditions hold everywhere".into());
    }
    Ok(LyapunovReport {
        v_zero_at_origin,
        v_definite: SampledDefiniteness {
            kind: v_kind,
            witness: v_summary,
            notes: v_notes,
        },
        vdot_verdict,
        vdot_witness: vdot_summary,
        decrescent,
        radially_unbounded,
        power_bounds: power,
        vdot_quadratic,
        conclusion,
        established,
        theorem_invoked,
        autonomous,
        scan: cfg.clone(),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub unstable: bool,
    pub w_zero_at_origin: bool,
    pub w_class: SignClass,
    pub wdot_class: SignClass,
    pub w_witness: SignSummary,
    pub wdot_witness: SignSummary,
    pub notes: Vec<String>,
}

/// Instability test: `W(0) = 0`, `W ≥ 0` (and not identically zero), and
/// `Ẇ > 0` on every nonzero sample.
pub fn check_instability(sys: &SystemDef, w: &CandidateV, cfg: &ScanConfig) -> Result<InstabilityReport> {
    check_dims(sys)?;
    let autonomous = sys.is_autonomous() && !w.depends_on_time();
    let times = cfg.times(!autonomous);
    check_origin(sys, &times)?;
    let points = cfg.points(sys.dim);
    let zero = vec![0.0; sys.dim];
    let mut w_zero_at_origin = true;
    for &t in &times {
        if w.eval(&zero, t)?.abs() > 1e-12 {
            w_zero_at_origin = false;
        }
    }
    let w_ratio = |x: &[f64], t: f64| -> Result<(f64, f64)> { Ok((w.eval(x, t)?, sq(x))) };
    let w_witness = scan::sign_scan(&w_ratio, &points, &times, cfg.refine)?;
    let wd = |x: &[f64], t: f64| -> Result<(f64, f64)> {
        let s = vdot(sys, w, x, t)?;
        Ok((s.value, s.scale))
    };
    let wdot_witness = scan::sign_scan(&wd, &points, &times, cfg.refine)?;
    let w_class = w_witness.class();
    let wdot_class = wdot_witness.class();
    let unstable = w_zero_at_origin
        && matches!(w_class, SignClass::Positive | SignClass::NonNegative)
        && wdot_class == SignClass::Positive;
    let mut notes = vec![format!(
        "verdict holds on {} sampled points",
        points.len() * times.len()
    )];
    if !unstable {
        notes.push("the candidate does not establish instability".into());
    }
    Ok(InstabilityReport {
        unstable,
        w_zero_at_origin,
        w_class,
        wdot_class,
        w_witness,
        wdot_witness,
        notes,
    })
}

/// Solves `AᵀP + PA = -Q` through the Kronecker form
/// `(I⊗Aᵀ + Aᵀ⊗I) vec(P) = -vec(Q)`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if !a.is_square() || !q.is_square() || q.rows() != n {
        return Err(Error::DimensionMismatch("A and Q must be square of equal size".into()));
    }
    let qscale = q.frobenius_norm().max(linalg::NORM_FLOOR);
    if (q - &q.transpose()).frobenius_norm() > 1e-9 * qscale {
        return Err(Error::InvalidInput("Q must be symmetric".into()));
    }
    let at = a.transpose();
    let id = Matrix::identity(n);
    let k = &at.kron(&id) + &id.kron(&at);
    let rhs: Vec<f64> = q.as_slice().iter().map(|v| -v).collect();
    let vec_p = match linalg::solve_dense(&k, &rhs) {
        Ok(v) => v,
        Err(linalg::LinalgError::Singular { .. }) => return Err(Error::SingularLyapunovOperator),
        Err(e) => return Err(e.into()),
    };
    Ok(Matrix::from_row_major(n, n, vec_p).symmetrized())
}

/// Frobenius norm of `AᵀP + PA + Q`.
pub fn lyapunov_residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    let r = &(&(&a.transpose() * p) + &(p * a)) + q;
    r.frobenius_norm()
}

/// Coefficient matrix of a time-varying quadratic form; entries may mention
/// the state and time. Only the upper triangle is used (mirrored).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormTV {
    n: usize,
    entries: Vec<Expr>,
}

impl QuadraticFormTV {
    pub fn new(n: usize, entries: Vec<Expr>) -> Result<Self> {
        if entries.len() != n * n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for an {n}x{n} form",
                entries.len()
            )));
        }
        Ok(QuadraticFormTV { n, entries })
    }

    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>], opts: &ParseOptions) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch("coefficient matrix must be square".into()));
            }
            for s in row {
                entries.push(expr::parse_with(s.as_ref(), opts)?);
            }
        }
        Self::new(n, entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<Matrix> {
        let ctx = EvalContext::new(x, t);
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.entries[i * self.n + j].eval(&ctx)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }
}

/// Scan settings for the generalized Sylvester test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SylvesterScan {
    pub t0: f64,
    pub t_span: f64,
    /// States range over `Σ x_j² < mu`.
    pub mu: f64,
    /// Lower bounds δ_k for the minors; defaults to 1e-6 each.
    pub deltas: Option<Vec<f64>>,
    pub space_samples: usize,
    pub time_samples: usize,
}

impl Default for SylvesterScan {
    fn default() -> Self {
        SylvesterScan {
            t0: 0.0,
            t_span: 50.0,
            mu: 1.0,
            deltas: None,
            space_samples: 1024,
            time_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SylvesterVerdict {
    pub positive_definite: bool,
    pub min_minors: Vec<f64>,
    /// Sample `(x, t)` where each minimum was observed.
    pub argmin: Vec<(Vec<f64>, f64)>,
    pub deltas: Vec<f64>,
    pub samples: usize,
}

/// Generalized Sylvester criterion: every leading minor stays at or above
/// its δ_k across the sampled `(x, t)` domain.
pub fn sylvester_tv(q: &QuadraticFormTV, cfg: &SylvesterScan) -> Result<SylvesterVerdict> {
    let n = q.dim();
    let deltas = cfg.deltas.clone().unwrap_or_else(|| vec![1e-6; n]);
    if deltas.len() != n || deltas.iter().any(|d| *d <= 0.0) {
        return Err(Error::InvalidInput("need one positive delta per minor".into()));
    }
    let mut points = vec![vec![0.0; n]];
    points.extend(scan::ball_points(n, cfg.mu.sqrt(), cfg.space_samples));
    let times = scan::time_samples(cfg.t0, cfg.t_span, cfg.time_samples);
    let mut min_minors = vec![f64::INFINITY; n];
    let mut argmin = vec![(Vec::new(), cfg.t0); n];
    for &t in &times {
        for x in &points {
            let m = q.eval(x, t)?;
            let minors = linalg::principal_minors(&m)?;
            for k in 0..n {
                if minors[k] < min_minors[k] {
                    min_minors[k] = minors[k];
                    argmin[k] = (x.clone(), t);
                }
            }
        }
    }
    let positive_definite = min_minors.iter().zip(&deltas).all(|(m, d)| m >= d);
    Ok(SylvesterVerdict {
        positive_definite,
        min_minors,
        argmin,
        deltas,
        samples: points.len() * times.len(),
    })
}

/// Sampling settings for attraction-region estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionConfig {
    pub cmax: f64,
    /// Number of uniformly spaced levels in `(0, cmax]`.
    pub levels: usize,
    /// Directions sampled on each level set.
    pub directions: usize,
}

impl Default for AttractionConfig {
    fn default() -> Self {
        AttractionConfig {
            cmax: 10.0,
            levels: 1000,
            directions: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionRegion {
    /// Largest grid level `c` such that every sampled level `c' ≤ c` is free
    /// of points with `V̇ ≥ 0`.
    pub c_star: f64,
    /// Bisection estimate of where the first violation appears (equals
    /// `cmax` when none was found).
    pub boundary: f64,
    /// First violating sample, if any: point, level, `V̇`.
    pub violation: Option<(Vec<f64>, f64, f64)>,
    pub config: AttractionConfig,
    pub samples: usize,
}

/// Estimates the largest sublevel set `{xᵀPx < c}` on which `V̇ < 0` away
/// from the origin, for `V = xᵀPx`.
pub fn attraction_region(sys: &SystemDef, p: &Matrix, cfg: &AttractionConfig) -> Result<AttractionRegion> {
    check_dims(sys)?;
    let n = sys.dim;
    if p.rows() != n || p.cols() != n {
        return Err(Error::DimensionMismatch("P must match the system dimension".into()));
    }
    if !(cfg.cmax > 0.0) || cfg.levels == 0 || cfg.directions == 0 {
        return Err(Error::InvalidInput("need cmax > 0 and positive sample counts".into()));
    }
    let ps = p.symmetrized();
    let l = linalg::cholesky(&ps).map_err(|_| Error::InvalidInput("P must be positive definite".into()))?;
    check_origin(sys, &[0.0])?;
    let lt_inv = linalg::inverse(&l.transpose())?;
    let dirs: Vec<Vec<f64>> = scan::sphere_directions(n, cfg.directions)
        .into_iter()
        .map(|u| lt_inv.mul_vec(&u))
        .collect();
    let mut samples = 0usize;

    // First violating point on the level set {V = c}, if any.
    let mut violation_at = |c: f64| -> Result<Option<(Vec<f64>, f64)>> {
        let s = c.sqrt();
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|v| v * s).collect();
            if linalg::vec_norm(&x) < 1e-6 {
                continue;
            }
            samples += 1;
            let f = sys.eval_rhs(&x, 0.0)?;
            let grad: Vec<f64> = ps.mul_vec(&x).into_iter().map(|v| 2.0 * v).collect();
            let vd: f64 = grad.iter().zip(&f).map(|(g, fi)| g * fi).sum();
            let band = 1e-9 * linalg::vec_norm(&grad) * linalg::vec_norm(&f);
            if vd > band {
                return Ok(Some((x, vd)));
            }
        }
        Ok(None)
    };

    let step = cfg.cmax / cfg.levels as f64;
    for k in (1..=6).rev() {
        let c = step * 10f64.powi(-k);
        if violation_at(c)?.is_some() {
            return Err(Error::NoRegion);
        }
    }
    let mut first_bad = None;
    for j in 1..=cfg.levels {
        let c = step * j as f64;
        if let Some((x, vd)) = violation_at(c)? {
            first_bad = Some((j, x, vd));
            break;
        }
    }
    let (c_star, boundary, violation) = match first_bad {
        None => (cfg.cmax, cfg.cmax, None),
        Some((j, x, vd)) => {
            if j == 1 {
                return Err(Error::NoRegion);
            }
            let c_bad = step * j as f64;
            let (mut lo, mut hi) = (step * (j - 1) as f64, c_bad);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if violation_at(mid)?.is_some() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            (step * (j - 1) as f64, hi, Some((x, c_bad, vd)))
        }
    };
    Ok(AttractionRegion {
        c_star,
        boundary,
        violation,
        config: cfg.clone(),
        samples,
    })
}

//! Discrete-time systems `x(k+1) = f(x(k), k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, BinaryOp, EvalContext, Expr, ParseOptions, Var};
use crate::linalg::{self, Definiteness};
use crate::lyapunov::CandidateV;
use crate::odeint::{Rhs, SystemDef, ESCAPE_THRESHOLD};
use crate::scan::{self, SignClass, SignSummary};

/// Residual of `f(0, k)` below which the origin counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Default radius for local claims.
pub const DEFAULT_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub dim: usize,
    /// One update expression per component; the time variable reads as `k`.
    pub update: Vec<Expr>,
}

impl DiscreteSystem {
    pub fn new(update: Vec<Expr>) -> Result<Self> {
        let n = update.len();
        if n == 0 {
            return Err(Error::InvalidInput("system needs at least one update".into()));
        }
        if let Some(k) = update.iter().map(Expr::max_state_index).max().filter(|k| *k > n) {
            return Err(Error::InvalidInput(format!(
                "update mentions x{k} but the system has dimension {n}"
            )));
        }
        Ok(DiscreteSystem { dim: n, update })
    }

    /// Parses updates; `k` is accepted as the step index.
    pub fn parse<S: AsRef<str>>(update: &[S], opts: &ParseOptions) -> Result<Self> {
        let opts = opts.clone().time_alias("k");
        let exprs = update
            .iter()
            .map(|s| expr::parse_with(s.as_ref(), &opts))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(exprs)
    }

    pub fn step(&self, x: &[f64], k: u64) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state has length {}, system dimension is {}",
                x.len(),
                self.dim
            )));
        }
        let ctx = EvalContext::new(x, k as f64);
        self.update.iter().map(|e| e.eval(&ctx).map_err(Error::from)).collect()
    }

    pub fn depends_on_k(&self) -> bool {
        self.update.iter().any(Expr::depends_on_time)
    }
}

fn linear_rhs(entries: impl Fn(usize, usize) -> Expr, n: usize) -> Vec<Expr> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Expr::binary(BinaryOp::Mul, entries(i, j), Expr::state(j + 1)))
                .reduce(|a, b| Expr::binary(BinaryOp::Add, a, b))
                .unwrap()
        })
        .collect()
}

/// Euler approximation `x(k+1) = x(k) + T f(x(k), Tk)`, built structurally.
pub fn euler_discretize(sys: &SystemDef, period: f64) -> Result<DiscreteSystem> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sampling period must be positive, got {period}"
        )));
    }
    if !sys.delays.is_empty() {
        return Err(Error::InvalidInput("delay systems cannot be discretized".into()));
    }
    let n = sys.dim;
    let rhs: Vec<Expr> = match &sys.rhs {
        Rhs::Nonlinear(eqs) => eqs.clone(),
        Rhs::LinearTimeVarying(p) => linear_rhs(|i, j| p.entry(i, j).clone(), n),
        Rhs::LinearConstant { a, input } => {
            let mut f = linear_rhs(|i, j| Expr::num(a[(i, j)]), n);
            if let Some(inp) = input {
                for (fi, bu) in f.iter_mut().zip(inp.b.mul_vec(&inp.u)) {
                    *fi = Expr::binary(BinaryOp::Add, fi.clone(), Expr::num(bu));
                }
            }
            f
        }
    };
    let scaled_time = Expr::binary(BinaryOp::Mul, Expr::num(period), Expr::time());
    let update = rhs
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let f = f.substitute(&Var::Time, &scaled_time);
            Expr::binary(
                BinaryOp::Add,
                Expr::state(i + 1),
                Expr::binary(BinaryOp::Mul, Expr::num(period), f),
            )
        })
        .collect();
    DiscreteSystem::new(update)
}

/// States `x(0), …, x(K)`, truncated at the first escape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub states: Vec<Vec<f64>>,
    pub escaped: bool,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with header `k,x1,…,xn`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("k");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (k, x) in self.states.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in x {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn iterate(sys: &DiscreteSystem, x0: &[f64], steps: usize) -> Result<Orbit> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    for k in 0..steps {
        x = sys.step(&x, k as u64)?;
        if x.iter().any(|v| !v.is_finite() || v.abs() > ESCAPE_THRESHOLD) {
            return Ok(Orbit { states, escaped: true });
        }
        states.push(x.clone());
    }
    Ok(Orbit { states, escaped: false })
}

/// `ΔV(x, k) = V(f(x, k), k + 1) - V(x, k)`.
pub fn delta_v(sys: &DiscreteSystem, v: &CandidateV, x: &[f64], k: u64) -> Result<f64> {
    let next = sys.step(x, k)?;
    Ok(v.eval(&next, (k + 1) as f64)? - v.eval(x, k as f64)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscreteVerdict {
    AsymptoticallyStable,
    Stable,
    NoConclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteReport {
    pub verdict: DiscreteVerdict,
    pub v_definiteness: Definiteness,
    pub v_witness: SignSummary,
    pub delta_v_class: SignClass,
    pub delta_v_witness: SignSummary,
    pub radius: f64,
    pub samples: usize,
    pub notes: Vec<String>,
}

/// Sampled direct-method check on the ball of the given radius.
pub fn classify_discrete(sys: &DiscreteSystem, v: &CandidateV, radius: f64, samples: usize) -> Result<DiscreteReport> {
    let n = sys.dim;
    let time_varying = sys.depends_on_k() || v.depends_on_time();
    let ks: Vec<u64> = if time_varying { (0..32).collect() } else { vec![0] };
    let zero = vec![0.0; n];
    for &k in &ks {
        let residual = linalg::vec_norm(&sys.step(&zero, k)?);
        if residual > FIXED_POINT_TOL {
            return Err(Error::NotAFixedPoint { residual });
        }
    }
    let points = scan::ball_points(n, radius, samples);
    let times: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();

    let v_scan = |x: &[f64], t: f64| -> Result<(f64, f64)> { Ok((v.eval(x, t)?, sq(x))) };
    let v_witness = scan::sign_scan(&v_scan, &points, &times, 8)?;
    let mut v_definiteness = match v_witness.class() {
        SignClass::Positive => Definiteness::PositiveDefinite,
        SignClass::NonNegative | SignClass::Zero => Definiteness::PositiveSemidefinite,
        SignClass::Negative => Definiteness::NegativeDefinite,
        SignClass::NonPositive => Definiteness::NegativeSemidefinite,
        SignClass::Mixed => Definiteness::Indefinite,
    };
    if ks
        .iter()
        .any(|&k| v.eval(&zero, k as f64).map_or(true, |w| w.abs() > 1e-12))
    {
        v_definiteness = Definiteness::Indefinite;
    }

    // Sample times are whole steps; the scan hands them back as f64.
    let dv_scan = |x: &[f64], t: f64| -> Result<(f64, f64)> {
        let k = t as u64;
        let next = sys.step(x, k)?;
        let a = v.eval(&next, t + 1.0)?;
        let b = v.eval(x, t)?;
        Ok((a - b, a.abs() + b.abs()))
    };
    let delta_v_witness = scan::sign_scan(&dv_scan, &points, &times, 8)?;
    let delta_v_class = delta_v_witness.class();

    let verdict = if v_definiteness != Definiteness::PositiveDefinite {
        DiscreteVerdict::NoConclusion
    } else {
        match delta_v_class {
            SignClass::Negative => DiscreteVerdict::AsymptoticallyStable,
            SignClass::NonPositive | SignClass::Zero => DiscreteVerdict::Stable,
            _ => DiscreteVerdict::NoConclusion,
        }
    };
    let mut notes = vec![format!(
        "verdict holds on {} sampled points of the ball of radius {radius}",
        points.len() * times.len()
    )];
    if verdict == DiscreteVerdict::NoConclusion {
        notes.push("failure of this candidate does not imply instability".into());
    }
    Ok(DiscreteReport {
        verdict,
        v_definiteness,
        v_witness,
        delta_v_class,
        delta_v_witness,
        radius,
        samples: points.len() * times.len(),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn cubic_map(a: f64) -> DiscreteSystem {
        let opts = ParseOptions::new().param("a");
        let mut s = DiscreteSystem::parse(&["x1 + x2", "a*x1^3 + x2/2"], &opts).unwrap();
        let params = [("a".to_string(), a)].into_iter().collect();
        s.update = s.update.iter().map(|e| e.bind_params(&params)).collect();
        s
    }

    fn cubic_map_v() -> CandidateV {
        CandidateV::parse("x1^2/2 + 2*x1*x2 + 4*x2^2", &ParseOptions::new()).unwrap()
    }

    #[test]
    fn euler_of_decay() {
        let d = euler_discretize(&SystemDef::linear(Matrix::from_rows(&[[-1.0]])).unwrap(), 0.1).unwrap();
        assert!((d.step(&[1.0], 0).unwrap()[0] - 0.9).abs() < 1e-15);
        let o = iterate(&d, &[1.0], 10).unwrap();
        assert!((o.last_state()[0] - 0.9f64.powi(10)).abs() < 1e-14);
    }

    #[test]
    fn time_is_rescaled() {
        let s = SystemDef::parse_nonlinear(&["t"], &ParseOptions::new()).unwrap();
        let d = euler_discretize(&s, 0.5).unwrap();
        // x(k+1) = x + 0.5 * (0.5 k)
        assert_eq!(d.step(&[0.0], 4).unwrap()[0], 1.0);
    }

    #[test]
    fn example_orbit_and_delta() {
        assert_eq!(cubic_map(0.0).step(&[1.0, 1.0], 0).unwrap(), vec![2.0, 0.5]);
        assert!((delta_v(&cubic_map(0.0), &cubic_map_v(), &[1.0, 1.0], 0).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn classification() {
        assert_eq!(
            classify_discrete(&cubic_map(-1.0), &cubic_map_v(), DEFAULT_RADIUS, 512)
                .unwrap()
                .verdict,
            DiscreteVerdict::AsymptoticallyStable
        );
        assert_eq!(
            classify_discrete(&cubic_map(0.0), &cubic_map_v(), DEFAULT_RADIUS, 512)
                .unwrap()
                .verdict,
            DiscreteVerdict::Stable
        );
        let grow = DiscreteSystem::parse(&["2*x1"], &ParseOptions::new()).unwrap();
        let v = CandidateV::parse("x1^2", &ParseOptions::new()).unwrap();
        assert_eq!(
            classify_discrete(&grow, &v, 1.0, 64).unwrap().verdict,
            DiscreteVerdict::NoConclusion
        );
    }

    #[test]
    fn shifted_origin_is_not_fixed() {
        let s = DiscreteSystem::parse(&["x1 + 1"], &ParseOptions::new()).unwrap();
        let v = CandidateV::parse("x1^2", &ParseOptions::new()).unwrap();
        assert!(matches!(
            classify_discrete(&s, &v, 1.0, 16),
            Err(Error::NotAFixedPoint { .. })
        ));
    }

    #[test]
    fn escape_truncates() {
        let s = DiscreteSystem::parse(&["1000*x1"], &ParseOptions::new()).unwrap();
        let o = iterate(&s, &[1.0], 10).unwrap();
        assert!(o.escaped);
        assert_eq!(o.len(), 5);
    }
}

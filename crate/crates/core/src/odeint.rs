//! System definitions and fixed-step integrators: classical RK4 for vector
//! and matrix ODEs, and the method of steps for delay equations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::{self, EvalContext, Expr, ParseOptions};
use crate::linalg::Matrix;

/// State components beyond this magnitude count as a finite-time escape.
pub const ESCAPE_THRESHOLD: f64 = 1e12;

/// Upper bound on stored trajectory samples.
pub const MAX_SAMPLES: usize = 10_000_000;

/// A matrix whose entries are expressions in `t` (and bound parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Expr>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        for e in &entries {
            if e.max_state_index() > 0 {
                return Err(Error::InvalidInput(format!(
                    "coefficient entry `{e}` may not depend on the state"
                )));
            }
        }
        Ok(ExprMatrix { rows, cols, entries })
    }

    /// Parses nested rows of expression strings.
    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>], opts: &ParseOptions) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch("ragged matrix rows".into()));
            }
            for s in row {
                entries.push(expr::parse_with(s.as_ref(), opts)?);
            }
        }
        Self::new(r, c, entries)
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        ExprMatrix {
            rows: m.rows(),
            cols: m.cols(),
            entries: m.as_slice().iter().map(|v| Expr::Number(*v)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn eval(&self, t: f64) -> Result<Matrix> {
        let ctx = EvalContext::new(&[], t);
        let data = self
            .entries
            .iter()
            .map(|e| e.eval(&ctx))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Matrix::from_row_major(self.rows, self.cols, data))
    }

    pub fn depends_on_time(&self) -> bool {
        self.entries.iter().any(Expr::depends_on_time)
    }

    pub fn bind_params(&self, params: &BTreeMap<String, f64>) -> Self {
        ExprMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.bind_params(params)).collect(),
        }
    }
}

/// A coefficient matrix that is either constant or a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFn {
    Constant(Matrix),
    TimeVarying(ExprMatrix),
}

impl MatrixFn {
    pub fn at(&self, t: f64) -> Result<Matrix> {
        match self {
            MatrixFn::Constant(m) => Ok(m.clone()),
            MatrixFn::TimeVarying(e) => e.eval(t),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            MatrixFn::Constant(m) => (m.rows(), m.cols()),
            MatrixFn::TimeVarying(e) => (e.rows(), e.cols()),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            MatrixFn::Constant(_) => true,
            MatrixFn::TimeVarying(e) => !e.depends_on_time(),
        }
    }
}

/// Constant forcing term `B u` of an affine system.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantInput {
    pub b: Matrix,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    LinearConstant { a: Matrix, input: Option<ConstantInput> },
    LinearTimeVarying(ExprMatrix),
    Nonlinear(Vec<Expr>),
}

/// One delayed term `A_i(t) x(t - lag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub lag: f64,
    pub coeff: MatrixFn,
}

/// A continuous-time system `ẋ = f(x, t) + Σ A_i(t) x(t - h_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDef {
    pub dim: usize,
    pub rhs: Rhs,
    pub delays: Vec<DelayTerm>,
    pub period: Option<f64>,
}

impl SystemDef {
    pub fn linear(a: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("system matrix must be square".into()));
        }
        Ok(SystemDef {
            dim: a.rows(),
            rhs: Rhs::LinearConstant { a, input: None },
            delays: Vec::new(),
            period: None,
        })
    }

    pub fn linear_time_varying(p: ExprMatrix) -> Result<Self> {
        if p.rows() != p.cols() {
            return Err(Error::DimensionMismatch("system matrix must be square".into()));
        }
        Ok(SystemDef {
            dim: p.rows(),
            rhs: Rhs::LinearTimeVarying(p),
            delays: Vec::new(),
            period: None,
        })
    }

    pub fn nonlinear(equations: Vec<Expr>) -> Result<Self> {
        let n = equations.len();
        if n == 0 {
            return Err(Error::InvalidInput("system needs at least one equation".into()));
        }
        for (i, e) in equations.iter().enumerate() {
            let k = e.max_state_index();
            if k > n {
                return Err(Error::InvalidInput(format!(
                    "equation {} mentions x{k} but the system has dimension {n}",
                    i + 1
                )));
            }
        }
        Ok(SystemDef {
            dim: n,
            rhs: Rhs::Nonlinear(equations),
            delays: Vec::new(),
            period: None,
        })
    }

    /// Parses one expression per component.
    pub fn parse_nonlinear<S: AsRef<str>>(equations: &[S], opts: &ParseOptions) -> Result<Self> {
        let exprs = equations
            .iter()
            .map(|s| expr::parse_with(s.as_ref(), opts))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::nonlinear(exprs)
    }

    pub fn with_input(mut self, b: Matrix, u: Vec<f64>) -> Result<Self> {
        match &mut self.rhs {
            Rhs::LinearConstant { input, .. } => {
                if b.rows() != self.dim || b.cols() != u.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "input matrix is {}x{}, input vector has length {}",
                        b.rows(),
                        b.cols(),
                        u.len()
                    )));
                }
                *input = Some(ConstantInput { b, u });
                Ok(self)
            }
            _ => Err(Error::InvalidInput(
                "inputs apply to constant linear systems only".into(),
            )),
        }
    }

    /// Adds a delayed term, keeping delays sorted by lag.
    pub fn with_delay(mut self, lag: f64, coeff: MatrixFn) -> Result<Self> {
        if !(lag > 0.0 && lag.is_finite()) {
            return Err(Error::InvalidInput(format!("delay must be positive, got {lag}")));
        }
        if coeff.dims() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch("delay coefficient must be n x n".into()));
        }
        self.delays.push(DelayTerm { lag, coeff });
        self.delays.sort_by(|a, b| a.lag.partial_cmp(&b.lag).unwrap());
        Ok(self)
    }

    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidInput(format!("period must be positive, got {period}")));
        }
        self.period = Some(period);
        Ok(self)
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self.rhs, Rhs::Nonlinear(_))
    }

    /// True when no part of the right-hand side mentions `t`.
    pub fn is_autonomous(&self) -> bool {
        let rhs_free = match &self.rhs {
            Rhs::LinearConstant { .. } => true,
            Rhs::LinearTimeVarying(p) => !p.depends_on_time(),
            Rhs::Nonlinear(eqs) => !eqs.iter().any(Expr::depends_on_time),
        };
        rhs_free && self.delays.iter().all(|d| d.coeff.is_constant())
    }

    pub fn max_lag(&self) -> f64 {
        self.delays.iter().map(|d| d.lag).fold(0.0, f64::max)
    }

    /// The coefficient matrix of the undelayed linear part at time `t`.
    pub fn linear_matrix_at(&self, t: f64) -> Result<Matrix> {
        match &self.rhs {
            Rhs::LinearConstant { a, .. } => Ok(a.clone()),
            Rhs::LinearTimeVarying(p) => p.eval(t),
            Rhs::Nonlinear(_) => Err(Error::NotLinear),
        }
    }

    /// Undelayed right-hand side `f(x, t)`.
    pub fn eval_rhs(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        match &self.rhs {
            Rhs::LinearConstant { a, input } => {
                let mut out = a.mul_vec(x);
                if let Some(inp) = input {
                    for (o, v) in out.iter_mut().zip(inp.b.mul_vec(&inp.u)) {
                        *o += v;
                    }
                }
                Ok(out)
            }
            Rhs::LinearTimeVarying(p) => Ok(p.eval(t)?.mul_vec(x)),
            Rhs::Nonlinear(eqs) => {
                let ctx = EvalContext::new(x, t);
                eqs.iter().map(|e| e.eval(&ctx).map_err(Error::from)).collect()
            }
        }
    }

    /// The same system without delayed terms.
    pub fn undelayed(&self) -> SystemDef {
        SystemDef {
            dim: self.dim,
            rhs: self.rhs.clone(),
            delays: Vec::new(),
            period: self.period,
        }
    }
}

/// A sampled solution on a uniform grid (last step may be shorter).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| crate::linalg::vec_norm(s)).collect()
    }

    /// CSV with header `t,x1,...,xn` and full-precision values.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map(Vec::len).unwrap_or(0);
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t}");
            for v in x {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn check_step(h: f64, t0: f64, t1: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidStep(format!("step must be positive, got {h}")));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidInput(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let steps = ((t1 - t0) / h - 1e-9).ceil().max(1.0);
    if steps + 1.0 > MAX_SAMPLES as f64 {
        return Err(Error::TooManySamples {
            samples: steps as usize + 1,
            cap: MAX_SAMPLES,
        });
    }
    Ok(steps as usize)
}

fn grid_time(t0: f64, t1: f64, h: f64, k: usize, steps: usize) -> f64 {
    if k == steps {
        t1
    } else {
        t0 + k as f64 * h
    }
}

fn escaped(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > ESCAPE_THRESHOLD)
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

/// One classical RK4 step of `ẋ = f(x, t)`.
pub fn rk4_step<F>(f: &mut F, x: &[f64], t: f64, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let k1 = f(x, t)?;
    let k2 = f(&axpy(x, 0.5 * h, &k1), t + 0.5 * h)?;
    let k3 = f(&axpy(x, 0.5 * h, &k2), t + 0.5 * h)?;
    let k4 = f(&axpy(x, h, &k3), t + h)?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates an arbitrary vector field with fixed-step RK4.
pub fn integrate_fn<F>(mut f: F, x0: &[f64], t0: f64, t1: f64, h: f64) -> Result<Trajectory>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let steps = check_step(h, t0, t1)?;
    if escaped(x0) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(x0.to_vec());
    for k in 0..steps {
        let t = grid_time(t0, t1, h, k, steps);
        let tn = grid_time(t0, t1, h, k + 1, steps);
        let x = rk4_step(&mut f, &states[k], t, tn - t)?;
        if escaped(&x) {
            return Err(Error::NonFiniteState { t: tn });
        }
        times.push(tn);
        states.push(x);
    }
    Ok(Trajectory { times, states, step: h })
}

/// Integrates a system without delays from `x0` at `t0` to `t1`.
pub fn integrate(sys: &SystemDef, x0: &[f64], t0: f64, t1: f64, h: f64) -> Result<Trajectory> {
    if !sys.delays.is_empty() {
        return Err(Error::InvalidInput(
            "system has delayed terms; use integrate_dde".into(),
        ));
    }
    if x0.len() != sys.dim {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system dimension is {}",
            x0.len(),
            sys.dim
        )));
    }
    integrate_fn(|x, t| sys.eval_rhs(x, t), x0, t0, t1, h)
}

/// Fundamental matrix `X(t1)` of a linear system with `X(t0) = I`.
pub fn integrate_matrix(sys: &SystemDef, t0: f64, t1: f64, h: f64) -> Result<Matrix> {
    if !sys.is_linear() {
        return Err(Error::NotLinear);
    }
    let n = sys.dim;
    let steps = check_step(h, t0, t1)?;
    let constant = matches!(sys.rhs, Rhs::LinearConstant { .. });
    let a_const = if constant {
        Some(sys.linear_matrix_at(t0)?)
    } else {
        None
    };
    let a_at = |t: f64| -> Result<Matrix> {
        match &a_const {
            Some(a) => Ok(a.clone()),
            None => sys.linear_matrix_at(t),
        }
    };
    let mut x = Matrix::identity(n);
    for k in 0..steps {
        let t = grid_time(t0, t1, h, k, steps);
        let tn = grid_time(t0, t1, h, k + 1, steps);
        let dt = tn - t;
        let a1 = a_at(t)?;
        let a2 = a_at(t + 0.5 * dt)?;
        let a4 = a_at(tn)?;
        let k1 = &a1 * &x;
        let k2 = &a2 * &(&x + &k1.scale(0.5 * dt));
        let k3 = &a2 * &(&x + &k2.scale(0.5 * dt));
        let k4 = &a4 * &(&x + &k3.scale(dt));
        let incr = &(&(&k1 + &k2.scale(2.0)) + &k3.scale(2.0)) + &k4;
        x = &x + &incr.scale(dt / 6.0);
        if escaped(x.as_slice()) {
            return Err(Error::NonFiniteState { t: tn });
        }
    }
    Ok(x)
}

/// Initial function on `[-h_max, 0]`, interpolated piecewise linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFn {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl HistoryFn {
    /// φ(t) ≡ value on `[-span, 0]`.
    pub fn constant(value: Vec<f64>, span: f64) -> Self {
        HistoryFn {
            times: vec![-span, 0.0],
            values: vec![value.clone(), value],
        }
    }

    /// Samples `phi` on `samples + 1` uniform points of `[-span, 0]`.
    pub fn sampled(span: f64, samples: usize, phi: impl Fn(f64) -> Vec<f64>) -> Self {
        let samples = samples.max(1);
        let times: Vec<f64> = (0..=samples)
            .map(|i| -span + span * i as f64 / samples as f64)
            .collect();
        let values = times.iter().map(|&t| phi(t)).collect();
        HistoryFn { times, values }
    }

    pub fn span(&self) -> f64 {
        -self.times.first().copied().unwrap_or(0.0)
    }

    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let tol = 1e-12 * (1.0 + t.abs());
        let first = *self.times.first().ok_or(Error::HistoryGap { t })?;
        let last = *self.times.last().unwrap();
        if t < first - tol || t > last + tol {
            return Err(Error::HistoryGap { t });
        }
        if self.times.len() == 1 {
            return Ok(self.values[0].clone());
        }
        let idx = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (ta, tb) = (self.times[idx - 1], self.times[idx]);
        let w = if tb > ta {
            ((t - ta) / (tb - ta)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok(self.values[idx - 1]
            .iter()
            .zip(&self.values[idx])
            .map(|(a, b)| a + w * (b - a))
            .collect())
    }

    fn validate(&self, dim: usize, max_lag: f64) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(Error::InvalidInput("history needs matching times and values".into()));
        }
        if self.values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("history value has wrong length".into()));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("history times must be ascending".into()));
        }
        let last = *self.times.last().unwrap();
        if last.abs() > 1e-12 {
            return Err(Error::HistoryGap { t: 0.0 });
        }
        if self.times[0] > -max_lag + 1e-12 * (1.0 + max_lag) {
            return Err(Error::HistoryGap { t: -max_lag });
        }
        Ok(())
    }
}

/// Integrates a delay system from `t = 0` to `t1` by the method of steps.
///
/// The step must not exceed the smallest lag and must divide every lag, so
/// delayed lookups fall between already computed grid nodes.
pub fn integrate_dde(sys: &SystemDef, history: &HistoryFn, t1: f64, h: f64) -> Result<Trajectory> {
    let steps = check_step(h, 0.0, t1)?;
    history.validate(sys.dim, sys.max_lag())?;
    for d in &sys.delays {
        let ratio = d.lag / h;
        let k = ratio.round();
        if k < 1.0 || (k * h - d.lag).abs() > 1e-9 * d.lag.max(1.0) {
            return Err(Error::InvalidStep(format!(
                "step {h} must divide the lag {} and not exceed it",
                d.lag
            )));
        }
    }
    let x0 = history.at(0.0)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0);

    // Value of x at time s ≤ current node, from history or the computed past.
    fn past(states: &[Vec<f64>], history: &HistoryFn, h: f64, s: f64) -> Result<Vec<f64>> {
        if s <= 0.0 {
            return history.at(s);
        }
        let pos = s / h;
        let k = pos.floor() as usize;
        let last = states.len() - 1;
        if k >= last {
            if pos - last as f64 <= 1e-9 {
                return Ok(states[last].clone());
            }
            return Err(Error::HistoryGap { t: s });
        }
        let w = pos - k as f64;
        Ok(states[k]
            .iter()
            .zip(&states[k + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect())
    }

    for k in 0..steps {
        let t = grid_time(0.0, t1, h, k, steps);
        let tn = grid_time(0.0, t1, h, k + 1, steps);
        let mut f = |x: &[f64], s: f64| -> Result<Vec<f64>> {
            let mut out = sys.eval_rhs(x, s)?;
            for d in &sys.delays {
                let delayed = past(&states, history, h, s - d.lag)?;
                let contrib = d.coeff.at(s)?.mul_vec(&delayed);
                for (o, c) in out.iter_mut().zip(contrib) {
                    *o += c;
                }
            }
            Ok(out)
        };
        let x = rk4_step(&mut f, &states[k], t, tn - t)?;
        if escaped(&x) {
            return Err(Error::NonFiniteState { t: tn });
        }
        times.push(tn);
        states.push(x);
    }
    Ok(Trajectory { times, states, step: h })
}

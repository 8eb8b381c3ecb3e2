//! Linear systems with periodic coefficients: monodromy matrix,
//! characteristic multipliers and the Liouville accuracy check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexScalar, Matrix};
use crate::odeint::{self, ExprMatrix, SystemDef};

/// Default half-width of the band around `|ρ| = 1`.
pub const UNIT_BAND: f64 = 1e-6;

/// Panels of the composite Simpson rule for the trace integral.
pub const SIMPSON_PANELS: usize = 10_000;

/// `ẋ = P(t) x` with `P(t + T) = P(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSystem {
    sys: SystemDef,
    period: f64,
}

impl PeriodicSystem {
    /// Builds the system and spot-checks periodicity at 16 times.
    pub fn new(p: ExprMatrix, period: f64) -> Result<Self> {
        let sys = SystemDef::linear_time_varying(p)?.with_period(period)?;
        Self::from_system(sys)
    }

    pub fn from_system(sys: SystemDef) -> Result<Self> {
        if !sys.is_linear() || !sys.delays.is_empty() {
            return Err(Error::InvalidInput(
                "periodic analysis needs ẋ = P(t)x without delays".into(),
            ));
        }
        let period = sys
            .period
            .ok_or_else(|| Error::InvalidInput("periodic system needs a period".into()))?;
        for k in 0..16 {
            let t = period * (k as f64 + 0.37) / 16.0;
            let a = sys.linear_matrix_at(t)?;
            let b = sys.linear_matrix_at(t + period)?;
            let gap = (&a - &b).max_abs();
            if gap > 1e-9 * (1.0 + a.max_abs()) {
                return Err(Error::InvalidInput(format!(
                    "coefficients are not {period}-periodic: gap {gap:e} at t = {t}"
                )));
            }
        }
        Ok(PeriodicSystem { sys, period })
    }

    pub fn system(&self) -> &SystemDef {
        &self.sys
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.sys.dim
    }

    /// The same coefficients viewed with a multiple of the period.
    pub fn with_period_multiple(&self, k: usize) -> Result<Self> {
        let sys = self.sys.clone().with_period(self.period * k.max(1) as f64)?;
        Ok(PeriodicSystem {
            period: self.period * k.max(1) as f64,
            sys,
        })
    }
}

/// Fundamental matrix after one period, `X(T)` with `X(0) = I`.
pub fn monodromy(sys: &PeriodicSystem, h: f64) -> Result<Matrix> {
    odeint::integrate_matrix(&sys.sys, 0.0, sys.period, h)
}

/// Eigenvalues of the monodromy matrix.
pub fn multipliers(a: &Matrix) -> Result<Vec<ComplexScalar>> {
    Ok(linalg::eigenvalues(a, linalg::DEFAULT_TOL)?)
}

/// Composite Simpson rule on `panels` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, panels: usize) -> Result<f64> {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64)?;
    }
    Ok(s * h / 3.0)
}

/// Both sides of the Liouville identity `Πρ = exp ∫ tr P(t) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
    /// Imaginary part of the multiplier product (zero for real systems).
    pub imaginary_residue: f64,
}

pub fn liouville_check(sys: &PeriodicSystem, mults: &[ComplexScalar]) -> Result<LiouvilleCheck> {
    let prod = mults.iter().fold(ComplexScalar::real(1.0), |acc, m| acc.mul(m));
    let integral = simpson(
        |t| Ok(sys.sys.linear_matrix_at(t)?.trace()),
        0.0,
        sys.period,
        SIMPSON_PANELS,
    )?;
    let rhs = integral.exp();
    let lhs = prod.modulus();
    if prod.im.abs() > 1e-9 * lhs.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "multiplier product has imaginary part {:e}",
            prod.im
        )));
    }
    Ok(LiouvilleCheck {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / rhs,
        imaginary_residue: prod.im,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeriodicVerdict {
    AsymptoticallyStable,
    StableNotAsymptotic,
    Unstable,
}

/// Verdict from the multiplier moduli with a band of `tol` around 1.
pub fn classify_periodic(mults: &[ComplexScalar], tol: f64) -> Result<PeriodicVerdict> {
    if mults.is_empty() {
        return Err(Error::InvalidInput("no multipliers".into()));
    }
    let moduli: Vec<f64> = mults.iter().map(ComplexScalar::modulus).collect();
    Ok(if moduli.iter().any(|m| *m > 1.0 + tol) {
        PeriodicVerdict::Unstable
    } else if moduli.iter().all(|m| *m < 1.0 - tol) {
        PeriodicVerdict::AsymptoticallyStable
    } else {
        PeriodicVerdict::StableNotAsymptotic
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetReport {
    pub period: f64,
    pub step: f64,
    pub monodromy: Matrix,
    pub multipliers: Vec<ComplexScalar>,
    pub moduli: Vec<f64>,
    pub liouville_lhs: f64,
    pub liouville_rhs: f64,
    pub relative_gap: f64,
    pub verdict: PeriodicVerdict,
    pub unit_band: f64,
}

/// Monodromy, multipliers, Liouville check and verdict in one pass.
pub fn analyze(sys: &PeriodicSystem, h: f64, tol: f64) -> Result<FloquetReport> {
    let a = monodromy(sys, h)?;
    let mults = multipliers(&a)?;
    let lv = liouville_check(sys, &mults)?;
    let verdict = classify_periodic(&mults, tol)?;
    Ok(FloquetReport {
        period: sys.period,
        step: h,
        moduli: mults.iter().map(ComplexScalar::modulus).collect(),
        monodromy: a,
        multipliers: mults,
        liouville_lhs: lv.lhs,
        liouville_rhs: lv.rhs,
        relative_gap: lv.relative_gap,
        verdict,
        unit_band: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ParseOptions;

    fn periodic(rows: &[Vec<&str>], period: f64) -> PeriodicSystem {
        PeriodicSystem::new(ExprMatrix::parse(rows, &ParseOptions::new()).unwrap(), period).unwrap()
    }

    #[test]
    fn constant_decay() {
        let s = periodic(&[vec!["-1", "0"], vec!["0", "-1"]], 1.0);
        let r = analyze(&s, 1e-3, UNIT_BAND).unwrap();
        let e = (-1f64).exp();
        assert!((&r.monodromy - &Matrix::from_diag(&[e, e])).max_abs() < 1e-12);
        assert!((r.liouville_rhs - (-2f64).exp()).abs() < 1e-14);
        assert_eq!(r.verdict, PeriodicVerdict::AsymptoticallyStable);
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let s = periodic(&[vec!["0", "0"], vec!["0", "0"]], 2.0);
        assert_eq!(monodromy(&s, 1e-2).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn rotation_has_unit_product() {
        let s = periodic(&[vec!["0", "1"], vec!["-1", "0"]], 2.0 * std::f64::consts::PI);
        let r = analyze(&s, 1e-3, UNIT_BAND).unwrap();
        assert!((r.liouville_lhs - 1.0).abs() < 1e-9);
        assert_eq!(r.liouville_rhs, 1.0);
    }

    #[test]
    fn verdicts() {
        let c = |v: &[f64]| v.iter().map(|&x| ComplexScalar::real(x)).collect::<Vec<_>>();
        assert_eq!(
            classify_periodic(&c(&[1.5]), UNIT_BAND).unwrap(),
            PeriodicVerdict::Unstable
        );
        assert_eq!(
            classify_periodic(&c(&[1.0, 0.3]), UNIT_BAND).unwrap(),
            PeriodicVerdict::StableNotAsymptotic
        );
    }

    #[test]
    fn non_periodic_coefficients_are_rejected() {
        let p = ExprMatrix::parse(&[vec!["t"]], &ParseOptions::new()).unwrap();
        assert!(PeriodicSystem::new(p, 1.0).is_err());
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| Ok(x * x * x - x), 0.0, 2.0, 4).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }
}

//! Eigenvalue classification of linear autonomous systems, the planar
//! critical-point taxonomy, equilibria, and linearization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexScalar, LinalgError, Matrix};
use crate::odeint::SystemDef;

/// Residual below which a point counts as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Default finite-difference step for Jacobians.
pub const JACOBIAN_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityKind {
    AsymptoticallyStable,
    StableMarginal,
    Unstable,
    CompletelyUnstable,
    Inconclusive,
}

/// Sign of an eigenvalue's real part relative to the tolerance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignClass {
    Negative,
    Zero,
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedEigenvalue {
    pub value: ComplexScalar,
    pub sign: SignClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub kind: StabilityKind,
    pub eigenvalues: Vec<ClassifiedEigenvalue>,
    /// Set exactly when the system is asymptotically stable.
    pub bibo: bool,
    /// Real parts within ±band count as zero.
    pub band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalPointKind {
    ImproperNode,
    ProperNode,
    Saddle,
    Center,
    Spiral,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub point: Vec<f64>,
    pub residual: f64,
    /// Jacobian nonsingular at the point.
    pub isolated: bool,
}

fn cluster_tol(a: &Matrix) -> f64 {
    1e-6 * (1.0 + a.frobenius_norm())
}

/// Classifies `ẋ = A x` by the real parts of the eigenvalues of `A`.
pub fn classify_linear(a: &Matrix, tol: f64) -> Result<StabilityVerdict> {
    let values = linalg::eigenvalues(a, tol)?;
    let band = tol * (1.0 + a.frobenius_norm());
    let eigenvalues: Vec<ClassifiedEigenvalue> = values
        .iter()
        .map(|&v| ClassifiedEigenvalue {
            value: v,
            sign: if v.re < -band {
                SignClass::Negative
            } else if v.re > band {
                SignClass::Positive
            } else {
                SignClass::Zero
            },
        })
        .collect();
    let all = |s: SignClass| eigenvalues.iter().all(|e| e.sign == s);
    let any = |s: SignClass| eigenvalues.iter().any(|e| e.sign == s);
    let kind = if eigenvalues.is_empty() {
        StabilityKind::Inconclusive
    } else if all(SignClass::Negative) {
        StabilityKind::AsymptoticallyStable
    } else if all(SignClass::Positive) {
        StabilityKind::CompletelyUnstable
    } else if any(SignClass::Positive) {
        StabilityKind::Unstable
    } else {
        // Marginal: stable only if every eigenvalue on the axis is simple.
        let ctol = cluster_tol(a);
        let marginal: Vec<ComplexScalar> = eigenvalues
            .iter()
            .filter(|e| e.sign == SignClass::Zero)
            .map(|e| e.value)
            .collect();
        let simple = marginal.iter().enumerate().all(|(i, x)| {
            marginal
                .iter()
                .enumerate()
                .all(|(j, y)| i == j || (x.re - y.re).hypot(x.im - y.im) > ctol)
        });
        if simple {
            StabilityKind::StableMarginal
        } else {
            StabilityKind::Inconclusive
        }
    };
    Ok(StabilityVerdict {
        kind,
        bibo: kind == StabilityKind::AsymptoticallyStable,
        eigenvalues,
        band,
    })
}

/// Planar critical-point type from the eigenvalue pattern of a 2×2 matrix.
pub fn classify_critical_point_2d(a: &Matrix, tol: f64) -> Result<CriticalPointKind> {
    if a.rows() != 2 || a.cols() != 2 {
        return Err(Error::DimensionMismatch(
            "critical-point taxonomy needs a 2x2 matrix".into(),
        ));
    }
    let norm = a.frobenius_norm().max(linalg::NORM_FLOOR);
    let sv = linalg::singular_values(a)?;
    if sv[1] <= tol * norm {
        return Err(Error::SingularMatrix);
    }
    let ev = linalg::eigenvalues(a, tol)?;
    let band = tol * (1.0 + a.frobenius_norm());
    let ctol = cluster_tol(a);
    let (l1, l2) = (ev[0], ev[1]);
    if l1.im.abs() > ctol {
        return Ok(if l1.re.abs() <= band {
            CriticalPointKind::Center
        } else {
            CriticalPointKind::Spiral
        });
    }
    if l1.re * l2.re < 0.0 {
        return Ok(CriticalPointKind::Saddle);
    }
    if (l1.re - l2.re).abs() <= ctol {
        let lambda = 0.5 * (l1.re + l2.re);
        let shifted = a - &Matrix::identity(2).scale(lambda);
        let rank = linalg::rank(&shifted, 1e-9 * norm)?;
        return Ok(if rank == 0 {
            CriticalPointKind::ProperNode
        } else {
            CriticalPointKind::Degenerate
        });
    }
    Ok(CriticalPointKind::ImproperNode)
}

/// Equilibrium `X_e = -A⁻¹ B u_e` of `ẋ = A x + B u` under constant input.
pub fn equilibrium_affine(a: &Matrix, b: &Matrix, ue: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() || b.rows() != a.rows() || b.cols() != ue.len() {
        return Err(Error::DimensionMismatch(
            "equilibrium needs A n x n, B n x m, u of length m".into(),
        ));
    }
    let rhs: Vec<f64> = b.mul_vec(ue).into_iter().map(|v| -v).collect();
    match linalg::solve_dense(a, &rhs) {
        Ok(x) => Ok(x),
        Err(LinalgError::Singular { .. }) => Err(Error::ContinuumOfEquilibria),
        Err(e) => Err(e.into()),
    }
}

/// Central-difference Jacobian of the right-hand side at `(x, t)`.
pub fn jacobian_fd(sys: &SystemDef, x: &[f64], t: f64, h: f64) -> Result<Matrix> {
    let n = sys.dim;
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, system dimension is {n}",
            x.len()
        )));
    }
    let mut jac = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = sys.eval_rhs(&xp, t)?;
        xp[j] = x[j] - h;
        let fm = sys.eval_rhs(&xp, t)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSearch {
    pub equilibria: Vec<Equilibrium>,
    /// One entry per seed that did not converge.
    pub notes: Vec<String>,
}

fn newton(sys: &SystemDef, seed: &[f64], tol: f64) -> std::result::Result<Vec<f64>, String> {
    let norm = |v: &[f64]| linalg::vec_norm(v);
    let mut x = seed.to_vec();
    let mut fx = sys.eval_rhs(&x, 0.0).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        if norm(&fx) < tol {
            return Ok(x);
        }
        let h = 1e-6 * linalg::vec_inf_norm(&x).max(1.0);
        let jac = jacobian_fd(sys, &x, 0.0, h).map_err(|e| e.to_string())?;
        let neg: Vec<f64> = fx.iter().map(|v| -v).collect();
        let dx = linalg::solve_dense(&jac, &neg).map_err(|_| "singular Jacobian".to_string())?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
            if let Ok(ft) = sys.eval_rhs(&trial, 0.0) {
                if norm(&ft) < norm(&fx) {
                    x = trial;
                    fx = ft;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return if norm(&fx) < tol {
                Ok(x)
            } else {
                Err(format!("stalled with residual {:e}", norm(&fx)))
            };
        }
    }
    if norm(&fx) < tol {
        Ok(x)
    } else {
        Err(format!("no convergence in 100 iterations (residual {:e})", norm(&fx)))
    }
}

/// Damped Newton from each seed; converged points are sorted
/// lexicographically and merged when closer than `1e-6`.
pub fn find_equilibria(sys: &SystemDef, seeds: &[Vec<f64>], tol: f64) -> Result<EquilibriumSearch> {
    let mut found = Vec::new();
    let mut notes = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        if seed.len() != sys.dim {
            return Err(Error::DimensionMismatch(format!("seed {i} has length {}", seed.len())));
        }
        match newton(sys, seed, tol) {
            Ok(x) => found.push(x),
            Err(why) => notes.push(format!("seed {seed:?} dropped: {why}")),
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.partial_cmp(y).unwrap())
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut merged: Vec<Vec<f64>> = Vec::new();
    for x in found {
        let dup = merged
            .iter()
            .any(|m| linalg::vec_inf_norm(&m.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-6);
        if !dup {
            merged.push(x);
        }
    }
    let equilibria = merged
        .into_iter()
        .map(|point| {
            let residual = linalg::vec_norm(&sys.eval_rhs(&point, 0.0)?);
            let jac = jacobian_fd(sys, &point, 0.0, JACOBIAN_STEP)?;
            let sv = linalg::singular_values(&jac)?;
            let isolated = sv.last().copied().unwrap_or(0.0) > 1e-9 * (1.0 + jac.frobenius_norm());
            Ok(Equilibrium {
                point,
                residual,
                isolated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumSearch { equilibria, notes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStability {
    pub point: Vec<f64>,
    pub jacobian: Matrix,
    /// Verdict for the linearized model itself.
    pub linearized: StabilityVerdict,
    /// What the linearization says about the nonlinear system near the point:
    /// marginal linear verdicts become `Inconclusive`.
    pub local_kind: StabilityKind,
    pub critical_point: Option<CriticalPointKind>,
    pub notes: Vec<String>,
}

/// Linearizes at an equilibrium and classifies the Jacobian.
pub fn local_stability(sys: &SystemDef, x_star: &[f64], tol: f64) -> Result<LocalStability> {
    let f = sys.eval_rhs(x_star, 0.0)?;
    let residual = linalg::vec_norm(&f);
    if residual >= EQUILIBRIUM_TOL.max(tol) {
        return Err(Error::NotAnEquilibrium { residual });
    }
    let jacobian = jacobian_fd(sys, x_star, 0.0, JACOBIAN_STEP)?;
    let linearized = classify_linear(&jacobian, tol)?;
    let mut notes = vec!["verdict is local to a neighbourhood of the equilibrium".to_string()];
    let local_kind = match linearized.kind {
        StabilityKind::StableMarginal => {
            notes.push("linearization is marginal and does not decide nonlinear stability".into());
            StabilityKind::Inconclusive
        }
        k => k,
    };
    let critical_point = if sys.dim == 2 {
        match classify_critical_point_2d(&jacobian, tol) {
            Ok(k) => Some(k),
            Err(Error::SingularMatrix) => {
                notes.push("Jacobian is singular; no critical-point type".into());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(LocalStability {
        point: x_star.to_vec(),
        jacobian,
        linearized,
        local_kind,
        critical_point,
        notes,
    })
}

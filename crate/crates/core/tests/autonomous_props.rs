use proptest::prelude::*;
use stabkit::autonomous::{self, CriticalPointKind, StabilityKind};
use stabkit::linalg::{self, Matrix};
use stabkit::{Error, ParseOptions, SystemDef};

fn square(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |d| Matrix::from_row_major(n, n, d))
}

fn any_square() -> impl Strategy<Value = Matrix> {
    (1usize..=5).prop_flat_map(square)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn verdict_is_invariant_under_similarity(
        (a, r) in (1usize..=5).prop_flat_map(|n| (square(n), square(n))),
    ) {
        let n = a.rows();
        let s = &Matrix::identity(n) + &r.scale(0.3);
        let sv = linalg::singular_values(&s).unwrap();
        prop_assume!(sv[0] / sv[n - 1] < 100.0);
        let b = &(&s * &a) * &linalg::inverse(&s).unwrap();
        let va = autonomous::classify_linear(&a, 1e-9).unwrap();
        let vb = autonomous::classify_linear(&b, 1e-9).unwrap();
        prop_assert_eq!(va.kind, vb.kind);
    }

    #[test]
    fn bibo_flag_tracks_asymptotic_stability(a in any_square()) {
        let v = autonomous::classify_linear(&a, 1e-9).unwrap();
        prop_assert_eq!(v.bibo, v.kind == StabilityKind::AsymptoticallyStable);
        let max_re = v.eigenvalues.iter().map(|e| e.value.re).fold(f64::NEG_INFINITY, f64::max);
        if v.kind == StabilityKind::AsymptoticallyStable {
            prop_assert!(max_re < 0.0);
        }
        if v.kind == StabilityKind::Unstable || v.kind == StabilityKind::CompletelyUnstable {
            prop_assert!(max_re > 0.0);
        }
    }

    #[test]
    fn planar_taxonomy_agrees_with_trace_and_determinant(a in square(2)) {
        let (tr, det) = (a.trace(), linalg::determinant(&a).unwrap());
        let disc = tr * tr - 4.0 * det;
        prop_assume!(det.abs() > 1e-3 && disc.abs() > 1e-3 && tr.abs() > 1e-3);
        let kind = autonomous::classify_critical_point_2d(&a, 1e-9).unwrap();
        let want = if det < 0.0 {
            CriticalPointKind::Saddle
        } else if disc < 0.0 {
            CriticalPointKind::Spiral
        } else {
            CriticalPointKind::ImproperNode
        };
        prop_assert_eq!(kind, want);
        let stable = autonomous::classify_linear(&a, 1e-9).unwrap().kind == StabilityKind::AsymptoticallyStable;
        prop_assert_eq!(stable, tr < 0.0 && det > 0.0);
    }

    #[test]
    fn central_difference_is_exact_on_quadratics(
        c in prop::collection::vec(-2.0f64..2.0, 12),
        x in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let f1 = format!("({})*x1^2 + ({})*x1*x2 + ({})*x2^2 + ({})*x1 + ({})*x2 + ({})", c[0], c[1], c[2], c[3], c[4], c[5]);
        let f2 = format!("({})*x1^2 + ({})*x1*x2 + ({})*x2^2 + ({})*x1 + ({})*x2 + ({})", c[6], c[7], c[8], c[9], c[10], c[11]);
        let s = SystemDef::parse_nonlinear(&[f1, f2], &ParseOptions::new()).unwrap();
        let j = autonomous::jacobian_fd(&s, &x, 0.0, 1e-5).unwrap();
        let exact = |k: usize| [
            2.0 * c[k] * x[0] + c[k + 1] * x[1] + c[k + 3],
            c[k + 1] * x[0] + 2.0 * c[k + 2] * x[1] + c[k + 4],
        ];
        for (i, row) in [exact(0), exact(6)].iter().enumerate() {
            for (jj, want) in row.iter().enumerate() {
                prop_assert!((j[(i, jj)] - want).abs() <= 1e-10 * (1.0 + want.abs()) * 1e1,
                    "J[{}][{}] = {} vs {}", i, jj, j[(i, jj)], want);
            }
        }
    }

    #[test]
    fn found_equilibria_have_small_residual(a in 0.2f64..3.0, seeds in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..8)) {
        let s = SystemDef::parse_nonlinear(&["x2".to_string(), format!("-x1 + {a}*x1^3 - x2")], &ParseOptions::new()).unwrap();
        let found = autonomous::find_equilibria(&s, &seeds, 1e-10).unwrap();
        let root = (1.0 / a).sqrt();
        for eq in &found.equilibria {
            prop_assert!(eq.residual < 1e-9);
            let x1 = eq.point[0];
            prop_assert!(x1.abs() < 1e-6 || (x1.abs() - root).abs() < 1e-6);
            prop_assert!(eq.isolated);
        }
    }
}

#[test]
fn damped_pendulum_equilibria() {
    let s = SystemDef::parse_nonlinear(&["x2", "-sin(x1) - 0.5*x2"], &ParseOptions::new()).unwrap();
    let down = autonomous::local_stability(&s, &[0.0, 0.0], 1e-9).unwrap();
    assert_eq!(down.local_kind, StabilityKind::AsymptoticallyStable);
    assert_eq!(down.critical_point, Some(CriticalPointKind::Spiral));
    let up = autonomous::local_stability(&s, &[std::f64::consts::PI, 0.0], 1e-9).unwrap();
    assert_eq!(up.local_kind, StabilityKind::Unstable);
    assert_eq!(up.critical_point, Some(CriticalPointKind::Saddle));
}

#[test]
fn marginal_linearization_is_inconclusive() {
    let s = SystemDef::parse_nonlinear(&["x2", "-x1 - x1^2*x2"], &ParseOptions::new()).unwrap();
    let r = autonomous::local_stability(&s, &[0.0, 0.0], 1e-9).unwrap();
    assert_eq!(r.linearized.kind, StabilityKind::StableMarginal);
    assert_eq!(r.local_kind, StabilityKind::Inconclusive);
}

#[test]
fn non_equilibrium_is_rejected() {
    let s = SystemDef::parse_nonlinear(&["x2 + 1", "-x1"], &ParseOptions::new()).unwrap();
    assert!(matches!(
        autonomous::local_stability(&s, &[0.0, 0.0], 1e-9),
        Err(Error::NotAnEquilibrium { .. })
    ));
}

#[test]
fn singular_affine_system_has_a_continuum() {
    let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
    let b = Matrix::identity(2);
    assert!(matches!(
        autonomous::equilibrium_affine(&a, &b, &[1.0, 1.0]),
        Err(Error::ContinuumOfEquilibria)
    ));
    let a = Matrix::from_rows(&[[-1.0, 0.0], [0.0, -2.0]]);
    let x = autonomous::equilibrium_affine(&a, &b, &[1.0, 4.0]).unwrap();
    assert_eq!(x, vec![1.0, 2.0]);
}

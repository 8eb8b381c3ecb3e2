use proptest::prelude::*;
use stabkit::floquet::{self, PeriodicSystem, PeriodicVerdict, UNIT_BAND};
use stabkit::linalg::{self, ComplexScalar, Matrix};
use stabkit::odeint::ExprMatrix;
use stabkit::ParseOptions;

use std::f64::consts::PI;

fn coupled() -> PeriodicSystem {
    let p = ExprMatrix::parse(
        &[
            vec!["-1", "sin(t)", "0"],
            vec!["cos(t)", "-1", "-sin(t)"],
            vec!["0", "cos(t)", "-1"],
        ],
        &ParseOptions::new(),
    )
    .unwrap();
    PeriodicSystem::new(p, 2.0 * PI).unwrap()
}

fn square(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |d| Matrix::from_row_major(n, n, d))
}

fn stable(n: usize) -> impl Strategy<Value = Matrix> {
    square(n).prop_map(move |r| {
        let top = linalg::eigenvalues(&r, 1e-9).unwrap()[0].re;
        &r - &Matrix::identity(n).scale(top + 0.2)
    })
}

fn closest(target: ComplexScalar, pool: &[ComplexScalar]) -> f64 {
    pool.iter()
        .map(|m| (m.re - target.re).hypot(m.im - target.im))
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn constant_coefficients_give_exponentials(
        a in (1usize..=4).prop_flat_map(stable),
        period in 0.5f64..2.0,
    ) {
        let sys = PeriodicSystem::new(ExprMatrix::from_matrix(&a), period).unwrap();
        let mults = floquet::multipliers(&floquet::monodromy(&sys, period / 1000.0).unwrap()).unwrap();
        for l in linalg::eigenvalues(&a, 1e-9).unwrap() {
            let want = ComplexScalar::new(l.re * period, l.im * period).exp();
            prop_assert!(closest(want, &mults) <= 1e-6 * want.modulus(), "{} not in {:?}", want, mults);
        }
        let verdict = floquet::classify_periodic(&mults, UNIT_BAND).unwrap();
        prop_assert_eq!(verdict, PeriodicVerdict::AsymptoticallyStable);
    }
}

#[test]
fn liouville_gap_shrinks_at_fourth_order() {
    let sys = coupled();
    let gap = |steps: usize| {
        let r = floquet::analyze(&sys, 2.0 * PI / steps as f64, UNIT_BAND).unwrap();
        r.relative_gap
    };
    let (coarse, fine) = (gap(40), gap(80));
    let ratio = coarse / fine;
    assert!(
        (12.0..=20.0).contains(&ratio),
        "gaps {coarse:e} {fine:e}, ratio {ratio}"
    );
}

#[test]
fn period_doubling_squares_the_multipliers() {
    let sys = coupled();
    let once = floquet::analyze(&sys, 1e-3, UNIT_BAND).unwrap();
    let twice = floquet::analyze(&sys.with_period_multiple(2).unwrap(), 1e-3, UNIT_BAND).unwrap();
    assert_eq!(once.verdict, twice.verdict);
    for m in &once.multipliers {
        let sq = m.mul(m);
        assert!(
            closest(sq, &twice.multipliers) <= 1e-6 * sq.modulus().max(1e-12),
            "{sq} missing"
        );
    }
}

#[test]
fn rotation_is_stable_but_not_asymptotic() {
    let a = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
    let sys = PeriodicSystem::new(ExprMatrix::from_matrix(&a), 2.0 * PI).unwrap();
    let r = floquet::analyze(&sys, 1e-3, UNIT_BAND).unwrap();
    assert_eq!(r.verdict, PeriodicVerdict::StableNotAsymptotic);
    for m in &r.moduli {
        assert!((m - 1.0).abs() < 1e-9);
    }
}

#[test]
fn parametric_growth_is_unstable() {
    // Positive trace forces the multiplier product above one.
    let p = ExprMatrix::parse(
        &[vec!["0.1", "1"], vec!["-1 - 0.5*cos(t)", "0.1"]],
        &ParseOptions::new(),
    )
    .unwrap();
    let sys = PeriodicSystem::new(p, 2.0 * PI).unwrap();
    let r = floquet::analyze(&sys, 1e-3, UNIT_BAND).unwrap();
    assert_eq!(r.verdict, PeriodicVerdict::Unstable);
    let product: f64 = r.moduli.iter().product();
    assert!((product - (0.2 * 2.0 * PI).exp()).abs() < 1e-8 * product);
}

#[test]
fn aperiodic_coefficients_are_rejected() {
    let p = ExprMatrix::parse(&[vec!["-t"]], &ParseOptions::new()).unwrap();
    assert!(PeriodicSystem::new(p, 1.0).is_err());
}

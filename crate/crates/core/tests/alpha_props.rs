use proptest::prelude::*;
use stabkit::alpha::{self, CertificateRoute, CertifyOptions, DelaySystem};
use stabkit::odeint::{self, ExprMatrix, MatrixFn};
use stabkit::{Error, Matrix, ParseOptions, SystemDef};

fn tv(rows: &[Vec<&str>]) -> ExprMatrix {
    ExprMatrix::parse(rows, &ParseOptions::new()).unwrap()
}

fn delay_tv(a0: ExprMatrix, terms: Vec<(f64, ExprMatrix)>) -> DelaySystem {
    let mut sys = SystemDef::linear_time_varying(a0).unwrap();
    for (lag, a) in terms {
        sys = sys.with_delay(lag, MatrixFn::TimeVarying(a)).unwrap();
    }
    DelaySystem::new(sys).unwrap()
}

fn two_lag_constant() -> DelaySystem {
    let a1 = Matrix::identity(2).scale((-0.4f64).exp() / 3.0);
    let sys = SystemDef::linear(Matrix::from_rows(&[[-2.0, 0.5], [-1.0, -4.0]]))
        .unwrap()
        .with_delay(0.5, MatrixFn::Constant(a1.clone()))
        .unwrap()
        .with_delay(1.0, MatrixFn::Constant(a1))
        .unwrap();
    DelaySystem::new(sys).unwrap()
}

fn riccati_time_varying() -> DelaySystem {
    let a0 = "(7*exp(-9*t) - 5)/(2*(1 + exp(-9*t)))";
    let a1 = "1/(sqrt(2)*(1 + exp(-9*t)))";
    let d1 = format!("exp(-0.5)*{a1}");
    let d2 = format!("exp(-1)*{a1}");
    delay_tv(
        tv(&[vec![a0, "0"], vec!["0", "-7.5"]]),
        vec![
            (0.5, tv(&[vec![d1.as_str(), "0"], vec!["0", "exp(-0.5)*sqrt(3)"]])),
            (1.0, tv(&[vec![d2.as_str(), "0"], vec!["0", "exp(-1)*sqrt(3)"]])),
        ],
    )
}

fn riccati_constant() -> DelaySystem {
    let sys = SystemDef::linear(Matrix::from_rows(&[[-17.0 / 6.0, 0.0], [4.0 / 3.0, -3.5]]))
        .unwrap()
        .with_delay(2.0, MatrixFn::Constant(Matrix::identity(2).scale((-1f64).exp())))
        .unwrap()
        .with_delay(4.0, MatrixFn::Constant(Matrix::identity(2).scale((-2f64).exp())))
        .unwrap();
    DelaySystem::new(sys).unwrap()
}

fn inputs() -> impl Strategy<Value = (f64, f64, f64, usize, f64)> {
    (-5.0f64..-0.01, 0.1f64..3.0, 0.0f64..0.5, 1usize..4, 0.1f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn max_alpha_sits_on_the_boundary((eta, p, a2, m, h) in inputs()) {
        if let Some(am) = alpha::max_alpha(eta, p, a2, m, h) {
            prop_assume!(am < 100.0);
            let lhs = alpha::rate_inequality_lhs(eta, p, a2, m, h, am);
            prop_assert!(lhs.abs() <= 1e-6, "lhs {} at {}", lhs, am);
        } else {
            prop_assert!(alpha::rate_inequality_lhs(eta, p, a2, m, h, 0.0) >= 0.0);
        }
    }

    #[test]
    fn max_alpha_is_monotone((eta, p, a2, m, h) in inputs(), bump in 1.01f64..2.0) {
        let base = alpha::max_alpha(eta, p, a2, m, h).unwrap_or(0.0);
        let le = |v: Option<f64>| v.unwrap_or(0.0) <= base + 1e-8;
        prop_assert!(le(alpha::max_alpha(eta, p * bump, a2, m, h)));
        prop_assert!(le(alpha::max_alpha(eta, p, a2 * bump, m, h)));
        prop_assert!(le(alpha::max_alpha(eta, p, a2, m + 1, h)));
        prop_assert!(le(alpha::max_alpha(eta, p, a2, m, h * bump)));
        let lower = alpha::max_alpha(eta * bump, p, a2, m, h).unwrap_or(0.0);
        prop_assert!(lower >= base - 1e-8);
    }

    #[test]
    fn envelope_of_pure_exponential(lambda in 0.2f64..3.0, x0 in 0.1f64..5.0) {
        let s = SystemDef::linear(Matrix::from_rows(&[[-lambda]])).unwrap();
        let traj = odeint::integrate(&s, &[x0], 0.0, 10.0, 1e-3).unwrap();
        let fit = alpha::fit_envelope(&traj, alpha::default_window_start(&traj)).unwrap();
        prop_assert!((fit.lambda - lambda).abs() < 1e-6 * lambda.max(1.0));
        prop_assert!(fit.verified);
        let norms = traj.norms();
        prop_assert!(norms.last().unwrap() < &norms[0]);
    }
}

fn assert_certified(cert: &alpha::AlphaCertificate) {
    assert!(cert.valid, "{cert:#?}");
    let check = cert.trajectory_check.as_ref().expect("trajectory check ran");
    assert!(check.verified, "{check:?}");
}

#[test]
fn delay_lyapunov_route_certifies_constant_system() {
    let cert = alpha::certify(
        &two_lag_constant(),
        0.4,
        CertificateRoute::DelayLyapunov,
        None,
        &CertifyOptions::default(),
    )
    .unwrap();
    assert_certified(&cert);
    assert!(cert.inequality_margin.unwrap() <= 0.0);
    assert!((cert.alpha_max.unwrap() - 0.879).abs() < 1e-3);
}

#[test]
fn rate_above_the_maximum_is_not_certified() {
    let cert = alpha::certify(
        &two_lag_constant(),
        0.95,
        CertificateRoute::DelayLyapunov,
        None,
        &CertifyOptions::default(),
    )
    .unwrap();
    assert!(!cert.valid);
    assert!(cert.inequality_margin.unwrap() > 0.0);
}

#[test]
fn riccati_route_certifies_time_varying_system() {
    let p = MatrixFn::TimeVarying(tv(&[vec!["exp(-9*t)", "0"], vec!["0", "1"]]));
    let cert = alpha::certify(
        &riccati_time_varying(),
        1.0,
        CertificateRoute::Riccati,
        Some(&p),
        &CertifyOptions::default(),
    )
    .unwrap();
    assert_certified(&cert);
    assert!(cert.residual < 1e-6);
}

#[test]
fn algebraic_riccati_route_certifies_constant_system() {
    let p = MatrixFn::Constant(Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]));
    let cert = alpha::certify(
        &riccati_constant(),
        0.5,
        CertificateRoute::AlgebraicRiccati,
        Some(&p),
        &CertifyOptions::default(),
    )
    .unwrap();
    assert_certified(&cert);
    assert!(cert.residual < 1e-9);
    assert!(cert.p_semidefinite);
}

#[test]
fn wrong_p_fails_the_residual() {
    let p = MatrixFn::Constant(Matrix::identity(2));
    let cert = alpha::certify(
        &riccati_constant(),
        0.5,
        CertificateRoute::AlgebraicRiccati,
        Some(&p),
        &CertifyOptions::default(),
    )
    .unwrap();
    assert!(!cert.valid);
    assert!(cert.residual > 1e-6);
}

#[test]
fn shifted_matrices_scale_by_exponentials() {
    let s = two_lag_constant();
    let (a0, ai) = alpha::shifted_matrices(&s, 0.3, 0.0).unwrap();
    let want0 = &s.a0(0.0).unwrap() + &Matrix::identity(2).scale(0.3);
    assert!((&a0 - &want0).max_abs() < 1e-15);
    for (k, lag) in [0.5f64, 1.0].iter().enumerate() {
        let want = s.a(k, 0.0).unwrap().scale((0.3 * lag).exp());
        assert!((&ai[k] - &want).max_abs() < 1e-15);
    }
}

#[test]
fn delay_system_requires_linear_delayed_dynamics() {
    let plain = SystemDef::linear(Matrix::identity(2).scale(-1.0)).unwrap();
    assert!(DelaySystem::new(plain).is_err());
    let nl = SystemDef::parse_nonlinear(&["-x1^3"], &ParseOptions::new())
        .unwrap()
        .with_delay(1.0, MatrixFn::Constant(Matrix::identity(1)))
        .unwrap();
    assert!(matches!(DelaySystem::new(nl), Err(Error::NotLinear)));
}

#[test]
fn zero_trajectory_cannot_be_fitted() {
    let s = SystemDef::linear(Matrix::from_rows(&[[-1.0]])).unwrap();
    let traj = odeint::integrate(&s, &[0.0], 0.0, 1.0, 1e-2).unwrap();
    assert!(matches!(alpha::fit_envelope(&traj, 0.1), Err(Error::ZeroTrajectory)));
}

//! Fixtures shared by the criterion benches.

use stabkit::{CandidateV, ExprMatrix, Matrix, ParseOptions, PeriodicSystem, SystemDef};

/// Deterministic dense matrix with entries in [-1, 1], shifted so the
/// spectrum sits in the left half plane.
pub fn stable_matrix(n: usize) -> Matrix {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15 ^ n as u64;
    let data = (0..n * n)
        .map(|k| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let v = (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            if k % (n + 1) == 0 {
                v - n as f64
            } else {
                v
            }
        })
        .collect();
    Matrix::from_row_major(n, n, data)
}

pub fn damped_pendulum() -> SystemDef {
    SystemDef::parse_nonlinear(&["x2", "-sin(x1) - 0.5*x2"], &ParseOptions::new()).expect("valid system")
}

pub fn energy() -> CandidateV {
    CandidateV::parse("x2^2/2 + 1 - cos(x1)", &ParseOptions::new()).expect("valid candidate")
}

pub fn periodic_three() -> PeriodicSystem {
    let rows = [
        ["-1", "sin(t)", "0"],
        ["cos(t)", "-1", "-sin(t)"],
        ["0", "cos(t)", "-1"],
    ];
    let entries = rows
        .iter()
        .flatten()
        .map(|s| stabkit::expr::parse(s).expect("valid entry"))
        .collect();
    let p = ExprMatrix::new(3, 3, entries).expect("square");
    PeriodicSystem::new(p, 2.0 * std::f64::consts::PI).expect("periodic")
}

pub fn delay_system() -> SystemDef {
    let a = Matrix::from_rows(&[[-2.0, 0.5], [-1.0, -4.0]]);
    let b = Matrix::identity(2).scale((-0.4f64).exp() / 3.0);
    SystemDef::linear(a)
        .and_then(|s| s.with_delay(0.5, stabkit::MatrixFn::Constant(b.clone())))
        .and_then(|s| s.with_delay(1.0, stabkit::MatrixFn::Constant(b)))
        .expect("valid delay system")
}

use proptest::prelude::*;
use stabkit::linalg::{self, Definiteness, Matrix};
use stabkit::ComplexScalar;

fn square(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |d| Matrix::from_row_major(n, n, d))
    })
}

fn symmetric(max_n: usize) -> impl Strategy<Value = Matrix> {
    square(max_n).prop_map(|m| m.symmetrized())
}

type C = (f64, f64);

fn c_sub(a: C, b: C) -> C {
    (a.0 - b.0, a.1 - b.1)
}

fn c_mul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn c_div(a: C, b: C) -> C {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

fn c_abs(a: C) -> f64 {
    a.0.hypot(a.1)
}

#[allow(clippy::needless_range_loop)]
/// det(M - λI) by complex Gaussian elimination with partial pivoting.
fn char_poly_at(m: &Matrix, lambda: ComplexScalar) -> f64 {
    let n = m.rows();
    let mut a: Vec<Vec<C>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = (m[(i, j)], 0.0);
                    if i == j {
                        c_sub(v, (lambda.re, lambda.im))
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let mut det: C = (1.0, 0.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| c_abs(a[x][k]).partial_cmp(&c_abs(a[y][k])).unwrap())
            .unwrap();
        if c_abs(a[p][k]) == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            det = (-det.0, -det.1);
        }
        det = c_mul(det, a[k][k]);
        for i in k + 1..n {
            let f = c_div(a[i][k], a[k][k]);
            for j in k..n {
                a[i][j] = c_sub(a[i][j], c_mul(f, a[k][j]));
            }
        }
    }
    c_abs(det)
}

fn xorshift(state: &mut u64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    (*state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Extremes of xᵀSx over random unit vectors.
fn quadratic_range(s: &Matrix, seed: u64) -> (f64, f64) {
    let n = s.rows();
    let mut state = seed | 1;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..4000 {
        let x: Vec<f64> = (0..n).map(|_| xorshift(&mut state)).collect();
        let r = linalg::vec_norm(&x);
        if r < 1e-3 {
            continue;
        }
        let sx = s.mul_vec(&x);
        let q: f64 = x.iter().zip(&sx).map(|(a, b)| a * b).sum::<f64>() / (r * r);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    (lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_are_roots_of_the_characteristic_polynomial(m in square(6)) {
        let n = m.rows() as i32;
        let ev = linalg::eigenvalues(&m, 1e-9).unwrap();
        prop_assert_eq!(ev.len(), m.rows());
        let scale = (1.0 + m.frobenius_norm()).powi(n);
        for l in &ev {
            let r = char_poly_at(&m, *l);
            prop_assert!(r <= 1e-9 * scale, "residual {} at {}", r, l);
        }
    }

    #[test]
    fn complex_eigenvalues_come_in_conjugate_pairs(m in square(6)) {
        let ev = linalg::eigenvalues(&m, 1e-9).unwrap();
        for l in ev.iter().filter(|l| l.im != 0.0) {
            let partner = ev.iter().filter(|c| c.re == l.re && c.im == -l.im).count();
            prop_assert!(partner >= 1, "no conjugate for {}", l);
        }
    }

    #[test]
    fn trace_and_determinant_match_the_spectrum(m in square(6)) {
        let n = m.rows() as i32;
        let ev = linalg::eigenvalues(&m, 1e-9).unwrap();
        let sum: f64 = ev.iter().map(|l| l.re).sum();
        let prod = ev.iter().fold(ComplexScalar::real(1.0), |acc, l| acc.mul(l));
        let scale = 1.0 + m.frobenius_norm();
        prop_assert!((sum - m.trace()).abs() <= 1e-8 * scale);
        let det = linalg::determinant(&m).unwrap();
        prop_assert!((prod.re - det).abs() <= 1e-8 * scale.powi(n));
        prop_assert!(prod.im.abs() <= 1e-8 * scale.powi(n));
    }

    #[test]
    fn sampled_quadratic_form_never_contradicts_definiteness(s in symmetric(5), seed in any::<u64>()) {
        let v = linalg::definiteness(&s, 1e-9).unwrap();
        let (lo, hi) = quadratic_range(&s, seed);
        let band = 1e-9 * s.frobenius_norm();
        if lo < -band {
            prop_assert!(!v.kind.is_positive_semidefinite(), "{:?} but xᵀSx = {}", v.kind, lo);
        }
        if hi > band {
            prop_assert!(!matches!(v.kind, Definiteness::NegativeDefinite | Definiteness::NegativeSemidefinite));
        }
        if lo < -band && hi > band {
            prop_assert_eq!(v.kind, Definiteness::Indefinite);
        }
    }

    #[test]
    fn gram_matrices_of_rank_deficient_factors_are_semidefinite(
        b in (2usize..=5).prop_flat_map(|n| prop::collection::vec(-1.0f64..1.0, (n - 1) * n)
            .prop_map(move |d| Matrix::from_row_major(n - 1, n, d))),
    ) {
        let g = &b.transpose() * &b;
        prop_assume!(g.frobenius_norm() > 1e-3);
        let v = linalg::definiteness(&g, 1e-9).unwrap();
        prop_assert_eq!(v.kind, Definiteness::PositiveSemidefinite);
        let neg = linalg::definiteness(&(-&g), 1e-9).unwrap();
        prop_assert_eq!(neg.kind, Definiteness::NegativeSemidefinite);
    }

    #[test]
    fn symmetric_spectrum_agrees_with_general_solver(s in symmetric(6)) {
        let a = linalg::symmetric_eigenvalues(&s).unwrap();
        let mut b: Vec<f64> = linalg::eigenvalues(&s, 1e-9).unwrap().iter().map(|l| l.re).collect();
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + s.frobenius_norm()));
        }
    }

    #[test]
    fn matrix_measure_bounded_by_spectral_norm(m in square(6)) {
        let eta = linalg::matrix_measure(&m).unwrap();
        let norm = linalg::spectral_norm(&m).unwrap();
        prop_assert!(eta <= norm + 1e-12 * (1.0 + norm));
        prop_assert!(eta >= -norm - 1e-12 * (1.0 + norm));
        let ev = linalg::eigenvalues(&m, 1e-9).unwrap();
        prop_assert!(ev[0].re <= eta + 1e-9 * (1.0 + norm));
    }

    #[test]
    fn dense_solve_round_trip(m in square(6), x in prop::collection::vec(-1.0f64..1.0, 6)) {
        let n = m.rows();
        let sv = linalg::singular_values(&m).unwrap();
        prop_assume!(sv[n - 1] > 1e-3 * sv[0]);
        let x = &x[..n];
        let b = m.mul_vec(x);
        let got = linalg::solve_dense(&m, &b).unwrap();
        let cond = sv[0] / sv[n - 1];
        for (g, w) in got.iter().zip(x) {
            prop_assert!((g - w).abs() <= 1e-12 * cond * 10.0);
        }
    }

    #[test]
    fn cholesky_reconstructs(b in square(5)) {
        let n = b.rows();
        let s = &(&b.transpose() * &b) + &Matrix::identity(n);
        let l = linalg::cholesky(&s).unwrap();
        let back = &l * &l.transpose();
        prop_assert!((&back - &s).frobenius_norm() <= 1e-12 * s.frobenius_norm());
    }
}

#[test]
fn rotation_has_imaginary_pair() {
    let m = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
    let ev = linalg::eigenvalues(&m, 1e-9).unwrap();
    assert_eq!(ev.len(), 2);
    assert!(ev[0].re.abs() < 1e-14 && (ev[0].im - 1.0).abs() < 1e-14);
    assert_eq!(ev[1], ev[0].conj());
}

#[test]
fn asymmetric_input_rejected() {
    let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
    assert!(linalg::definiteness(&m, 1e-9).is_err());
}

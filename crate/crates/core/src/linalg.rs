//! Dense real-matrix kernel.
//!
//! Everything here works on small, dense, row-major matrices (the systems in
//! scope are at most a few dozen states). The general eigenvalue solver is a
//! Hessenberg reduction followed by Francis double-shift QR; symmetric
//! problems (definiteness, matrix measure, spectral norm) go through cyclic
//! Jacobi rotations instead, which keeps their eigenvalues real and accurate.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tolerance for eigenvalue-based decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Absolute floor used in place of the norm of a (near-)zero matrix.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NonSquare { rows: usize, cols: usize },
    #[error("eigenvalue iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },
    #[error("matrix is singular (pivot {pivot:e} below threshold)")]
    Singular { pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix entries must be finite")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// A dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong;
    /// use [`Matrix::try_from_rows`] for untrusted input.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        Self::try_from_rows(rows).expect("ragged or non-finite rows")
    }

    pub fn try_from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != c {
                return Err(LinalgError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// (S + Sᵀ)/2.
    pub fn symmetrized(&self) -> Matrix {
        let t = self.transpose();
        (self + &t).scale(0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Top-left k×k block.
    pub fn leading_block(&self, k: usize) -> Matrix {
        let mut b = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] = self[(i, j)];
            }
        }
        b
    }

    /// Kronecker product self ⊗ other.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let mut k = Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == 0.0 {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        k[(i * other.rows + p, j * other.cols + q)] = a * other[(p, q)];
                    }
                }
            }
        }
        k
    }

    fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(LinalgError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl<'a> Add<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::try_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A complex number; eigenvalues and characteristic multipliers live here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexScalar {
    pub re: f64,
    pub im: f64,
}

impl ComplexScalar {
    pub const fn new(re: f64, im: f64) -> Self {
        ComplexScalar { re, im }
    }

    pub const fn real(re: f64) -> Self {
        ComplexScalar { re, im: 0.0 }
    }

    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn conj(&self) -> Self {
        ComplexScalar::new(self.re, -self.im)
    }

    pub fn mul(&self, o: &ComplexScalar) -> ComplexScalar {
        ComplexScalar::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }

    pub fn exp(&self) -> ComplexScalar {
        let r = self.re.exp();
        ComplexScalar::new(r * self.im.cos(), r * self.im.sin())
    }
}

impl fmt::Display for ComplexScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im == 0.0 {
            write!(f, "{}", self.re)
        } else if self.im > 0.0 {
            write!(f, "{}+{}i", self.re, self.im)
        } else {
            write!(f, "{}-{}i", self.re, -self.im)
        }
    }
}

/// Sorts a spectrum by descending real part, then descending imaginary part.
pub fn sort_spectrum(values: &mut [ComplexScalar]) {
    values.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

// ---------------------------------------------------------------------------
// General eigenvalues: Hessenberg reduction + Francis double-shift QR.
// ---------------------------------------------------------------------------

/// All eigenvalues of a square matrix, with multiplicity, sorted by
/// descending real part. Complex eigenvalues come in exact conjugate pairs.
///
/// `tol` is accepted for interface symmetry with the other decision
/// routines; convergence uses machine precision deflation.
pub fn eigenvalues(m: &Matrix, _tol: f64) -> Result<Vec<ComplexScalar>> {
    let n = m.require_square()?;
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = m.clone();
    balance(&mut h);
    hessenberg_in_place(&mut h);
    let mut values = hqr(&mut h)?;
    sort_spectrum(&mut values);
    Ok(values)
}

/// Diagonal similarity scaling by powers of two (Parlett–Reinsch) so rows and
/// columns have comparable norms. Leaves the spectrum unchanged.
fn balance(a: &mut Matrix) {
    let n = a.rows;
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form (entries below the first
/// subdiagonal are set to zero).
fn hessenberg_in_place(a: &mut Matrix) {
    let n = a.rows;
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let alpha: f64 = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
        v.fill(0.0);
        v[k + 1] = x0 + sign * alpha;
        for i in k + 2..n {
            v[i] = a[(i, k)];
        }
        let vnorm2: f64 = v[k + 1..].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A <- H A, H = I - 2 v vᵀ / (vᵀv)
        for j in 0..n {
            let dot: f64 = (k + 1..n).map(|i| v[i] * a[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k + 1..n {
                a[(i, j)] -= f * v[i];
            }
        }
        // A <- A H
        for i in 0..n {
            let dot: f64 = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum();
            let f = 2.0 * dot / vnorm2;
            for j in k + 1..n {
                a[(i, j)] -= f * v[j];
            }
        }
        a[(k + 1, k)] = -sign * alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; eigenvalues only.
/// Trailing 1×1 and 2×2 blocks are deflated and solved in closed form.
fn hqr(a: &mut Matrix) -> Result<Vec<ComplexScalar>> {
    let n = a.rows;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let sweep_cap = 500 * n;
    let mut sweeps = 0usize;

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // Look for a single small subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let s = a[(lu - 1, lu - 1)].abs() + a[(lu, lu)].abs();
                let s = if s == 0.0 { anorm } else { s };
                if a[(lu, lu - 1)].abs() <= f64::EPSILON * s {
                    a[(lu, lu - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            let x = a[(nu, nu)];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let y = a[(nu - 1, nu - 1)];
            let w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nn - 1 {
                // 2×2 block in closed form.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let xs = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    wr[nu - 1] = xs + z;
                    wr[nu] = if z != 0.0 { xs - w / z } else { xs + z };
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = xs + p;
                    wr[nu] = xs + p;
                    wi[nu - 1] = z;
                    wi[nu] = -z;
                }
                nn -= 2;
                break;
            }
            if sweeps >= sweep_cap {
                return Err(LinalgError::NoConvergence { sweeps: sweep_cap });
            }
            sweeps += 1;
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // Look for two consecutive small subdiagonal elements.
            let lu = l as usize;
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == lu {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                a[(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a[(i, i - 3)] = 0.0;
                }
            }
            // Double QR step on rows l..nn and columns m..nn.
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l as usize != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != nu {
                            pp += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= pp * z;
                        }
                        a[(k + 1, j)] -= pp * y;
                        a[(k, j)] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in lu..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != nu {
                            pp += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= pp * r;
                        }
                        a[(i, k + 1)] -= pp * q;
                        a[(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| ComplexScalar::new(re, im))
        .collect())
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues: cyclic Jacobi.
// ---------------------------------------------------------------------------

/// Eigenvalues of a symmetric matrix, ascending. Only the upper triangle is
/// trusted; callers symmetrize first.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    let n = s.require_square()?;
    if !s.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let mut a = s.symmetrized();
    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 || off < f64::MIN_POSITIVE {
            let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            d.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return Ok(d);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence { sweeps: max_sweeps })
}

/// Singular values, descending.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let ata = &a.transpose() * a;
    let mut ev = symmetric_eigenvalues(&ata)?;
    ev.reverse();
    Ok(ev.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// Numerical rank: singular values at or below `threshold` count as zero.
pub fn rank(a: &Matrix, threshold: f64) -> Result<usize> {
    Ok(singular_values(a)?.into_iter().filter(|s| *s > threshold).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    NegativeDefinite,
    NegativeSemidefinite,
    Indefinite,
}

impl Definiteness {
    pub fn is_positive_semidefinite(self) -> bool {
        matches!(
            self,
            Definiteness::PositiveDefinite | Definiteness::PositiveSemidefinite
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessVerdict {
    pub kind: Definiteness,
    /// Eigenvalues of the symmetrized matrix, ascending.
    pub eigenvalues: Vec<f64>,
    /// Leading principal minors, for the record.
    pub minors: Vec<f64>,
    /// Half-width of the band around zero inside which an eigenvalue counts as zero.
    pub band: f64,
}

/// Classifies a symmetric matrix by the signs of its eigenvalues.
///
/// The input must be symmetric to within `tol` relative to its Frobenius norm;
/// it is averaged with its transpose before testing.
pub fn definiteness(s: &Matrix, tol: f64) -> Result<DefinitenessVerdict> {
    s.require_square()?;
    let scale = s.frobenius_norm().max(NORM_FLOOR);
    let asym = (s - &s.transpose()).frobenius_norm();
    if asym > tol * scale {
        return Err(LinalgError::Asymmetric {
            asymmetry: asym / scale,
        });
    }
    let sym = s.symmetrized();
    let ev = symmetric_eigenvalues(&sym)?;
    let band = tol * scale;
    let all_pos = ev.iter().all(|&l| l > band);
    let all_neg = ev.iter().all(|&l| l < -band);
    let none_neg = ev.iter().all(|&l| l >= -band);
    let none_pos = ev.iter().all(|&l| l <= band);
    let kind = if all_pos {
        Definiteness::PositiveDefinite
    } else if all_neg {
        Definiteness::NegativeDefinite
    } else if none_neg {
        Definiteness::PositiveSemidefinite
    } else if none_pos {
        Definiteness::NegativeSemidefinite
    } else {
        Definiteness::Indefinite
    };
    Ok(DefinitenessVerdict {
        kind,
        eigenvalues: ev,
        minors: principal_minors(&sym)?,
        band,
    })
}

/// Leading principal minors Δ₁..Δₙ.
pub fn principal_minors(s: &Matrix) -> Result<Vec<f64>> {
    let n = s.require_square()?;
    (1..=n).map(|k| determinant(&s.leading_block(k))).collect()
}

/// Determinant via LU with partial pivoting.
pub fn determinant(a: &Matrix) -> Result<f64> {
    let n = a.require_square()?;
    let mut m = a.clone();
    let mut det = 1.0;
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == 0.0 {
            return Ok(0.0);
        }
        if piv != k {
            for j in 0..n {
                m.data.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = m[(k, k)];
        det *= d;
        for i in k + 1..n {
            let f = m[(i, k)] / d;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                m[(i, j)] -= f * m[(k, j)];
            }
        }
    }
    Ok(det)
}

/// Matrix measure η(A) = ½ λ_max(A + Aᵀ).
pub fn matrix_measure(a: &Matrix) -> Result<f64> {
    a.require_square()?;
    let s = a + &a.transpose();
    let ev = symmetric_eigenvalues(&s)?;
    Ok(0.5 * ev.last().copied().unwrap_or(0.0))
}

/// Spectral norm √λ_max(AᵀA), the largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Ok(0.0);
    }
    Ok(singular_values(a)?[0])
}

/// Solves `a x = b` by LU with partial pivoting.
///
/// A pivot smaller than `1e-14 · max|a|` is treated as singular.
pub fn solve_dense(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.require_square()?;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    let threshold = 1e-14 * a.max_abs().max(NORM_FLOOR);
    let mut m = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= threshold {
            return Err(LinalgError::Singular { pivot: pmax });
        }
        if piv != k {
            for j in 0..n {
                m.data.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        let d = m[(k, k)];
        for i in k + 1..n {
            let f = m[(i, k)] / d;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                m[(i, j)] -= f * m[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[(k, j)] * x[j]).sum();
        x[k] = (x[k] - s) / m[(k, k)];
    }
    Ok(x)
}

/// Matrix inverse via repeated dense solves.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.require_square()?;
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve_dense(a, &e)?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Lower-triangular Cholesky factor L with S = L Lᵀ. Fails with `Singular`
/// when S is not positive definite.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    let n = s.require_square()?;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let sum: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let d = s[(i, i)] - sum;
                if d <= 0.0 {
                    return Err(LinalgError::Singular { pivot: d });
                }
                l[(i, j)] = d.sqrt();
            } else {
                l[(i, j)] = (s[(i, j)] - sum) / l[(j, j)];
            }
        }
    }
    Ok(l)
}

pub fn vec_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn vec_inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

//! Deterministic sampling and sign scans.
//!
//! Points come from the Halton sequence (index starting at 1, so the origin
//! is never drawn), which makes every scan-based verdict reproducible. Sign
//! tests work on a scale-free ratio `value / scale` and then polish the worst
//! samples with a pattern search on the sphere through each sample, so that a
//! function touching zero away from the origin (semidefinite) is not mistaken
//! for a definite one.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::vec_norm;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Band around zero for scale-free ratios.
pub const RATIO_BAND: f64 = 1e-9;

/// Radical inverse of `index` in the given base.
pub fn halton(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % b) as f64;
        index /= b;
    }
    r
}

fn prime(d: usize) -> u32 {
    PRIMES[d % PRIMES.len()]
}

/// `count` points of the Halton sequence in the open ball of radius `radius`,
/// by rejection from the cube `[-1, 1]^dim`. Points closer to the origin
/// than `1e-6` are skipped.
pub fn ball_points(dim: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut i: u64 = 1;
    while out.len() < count {
        let u: Vec<f64> = (0..dim).map(|d| 2.0 * halton(i, prime(d)) - 1.0).collect();
        i += 1;
        let r = vec_norm(&u);
        if r >= 1.0 || r * radius < 1e-6 {
            continue;
        }
        out.push(u.into_iter().map(|v| v * radius).collect());
    }
    out
}

/// `count` unit directions. In the plane these are angles `2π·halton(i, 2)`;
/// otherwise normalized Halton points of the cube.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 1 {
        return (0..count).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
    }
    if dim == 2 {
        return (1..=count as u64)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * halton(i, 2);
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    let mut i: u64 = 1;
    while out.len() < count {
        let u: Vec<f64> = (0..dim).map(|d| 2.0 * halton(i, prime(d)) - 1.0).collect();
        i += 1;
        let r = vec_norm(&u);
        if !(1e-3..=1.0).contains(&r) {
            continue;
        }
        out.push(u.into_iter().map(|v| v / r).collect());
    }
    out
}

/// `count` uniformly spaced times covering `[t0, t0 + span]`.
pub fn time_samples(t0: f64, span: f64, count: usize) -> Vec<f64> {
    if count <= 1 || span == 0.0 {
        return vec![t0];
    }
    (0..count).map(|i| t0 + span * i as f64 / (count - 1) as f64).collect()
}

/// Where and how densely a scan samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub radius: f64,
    pub space_samples: usize,
    pub t0: f64,
    pub t_span: f64,
    pub time_samples: usize,
    /// How many of the worst samples get polished by pattern search.
    pub refine: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            radius: 1.0,
            space_samples: 4096,
            t0: 0.0,
            t_span: 50.0,
            time_samples: 256,
            refine: 8,
        }
    }
}

impl ScanConfig {
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        ball_points(dim, self.radius, self.space_samples)
    }

    /// Scan times; a single time when `time_varying` is false.
    pub fn times(&self, time_varying: bool) -> Vec<f64> {
        if time_varying {
            time_samples(self.t0, self.t_span, self.time_samples)
        } else {
            vec![self.t0]
        }
    }
}

/// A sample location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub t: f64,
    pub ratio: f64,
}

/// Extremes of `value / scale` over a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSummary {
    pub samples: usize,
    pub band: f64,
    pub min: SamplePoint,
    pub max: SamplePoint,
}

/// Sign class of a sampled scalar function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignClass {
    Positive,
    NonNegative,
    Negative,
    NonPositive,
    Zero,
    Mixed,
}

impl SignSummary {
    pub fn class(&self) -> SignClass {
        let (lo, hi, b) = (self.min.ratio, self.max.ratio, self.band);
        if lo >= -b && hi <= b {
            SignClass::Zero
        } else if lo > b {
            SignClass::Positive
        } else if lo >= -b {
            SignClass::NonNegative
        } else if hi < -b {
            SignClass::Negative
        } else if hi <= b {
            SignClass::NonPositive
        } else {
            SignClass::Mixed
        }
    }
}

fn ratio(value: f64, scale: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else if scale > 0.0 {
        value / scale
    } else {
        value.signum()
    }
}

/// Scans `f(x, t) -> (value, scale)` over `points × times`, then polishes
/// the `refine` most extreme samples on both ends.
pub fn sign_scan<F>(f: &F, points: &[Vec<f64>], times: &[f64], refine: usize) -> Result<SignSummary>
where
    F: Fn(&[f64], f64) -> Result<(f64, f64)>,
{
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(points.len() * times.len());
    for (ti, &t) in times.iter().enumerate() {
        for (pi, x) in points.iter().enumerate() {
            let (v, s) = f(x, t)?;
            all.push((ratio(v, s), pi, ti));
        }
    }
    let samples = all.len();
    let point = |r: f64, pi: usize, ti: usize| SamplePoint {
        x: points[pi].clone(),
        t: times[ti],
        ratio: r,
    };
    let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| a.0.partial_cmp(&b.0).unwrap();
    all.sort_by(cmp);
    let (r0, p0, t0) = all[0];
    let (r1, p1, t1) = all[samples - 1];
    let mut min = point(r0, p0, t0);
    let mut max = point(r1, p1, t1);
    for &(_, pi, ti) in all.iter().take(refine) {
        let cand = polish(f, &points[pi], times[ti], false);
        if cand.ratio < min.ratio {
            min = cand;
        }
    }
    for &(_, pi, ti) in all.iter().rev().take(refine) {
        let cand = polish(f, &points[pi], times[ti], true);
        if cand.ratio > max.ratio {
            max = cand;
        }
    }
    Ok(SignSummary {
        samples,
        band: RATIO_BAND,
        min,
        max,
    })
}

/// Pattern search for the extreme ratio on the sphere through `x0` at fixed
/// time. Evaluation failures just reject the trial point.
pub fn polish<F>(f: &F, x0: &[f64], t: f64, maximize: bool) -> SamplePoint
where
    F: Fn(&[f64], f64) -> Result<(f64, f64)>,
{
    let rho = vec_norm(x0);
    let eval = |x: &[f64]| f(x, t).ok().map(|(v, s)| ratio(v, s));
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut x = x0.to_vec();
    let mut best = eval(&x).unwrap_or(if maximize { f64::NEG_INFINITY } else { f64::INFINITY });
    let mut step = 0.25 * rho;
    let mut evals = 0;
    while step > 1e-10 * rho && evals < 4000 {
        let mut improved = false;
        for i in 0..x.len() {
            for s in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += s * step;
                let n = vec_norm(&y);
                if n == 0.0 {
                    continue;
                }
                for v in y.iter_mut() {
                    *v *= rho / n;
                }
                evals += 1;
                if let Some(r) = eval(&y) {
                    if better(r, best) {
                        best = r;
                        x = y;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    SamplePoint { x, t, ratio: best }
}

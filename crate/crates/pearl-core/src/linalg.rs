//! Small dense linear-algebra helpers shared by the problem library and the
//! verification suites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::DrawRng;

/// Dimension above which the spectral norm switches from a full SVD to
/// power iteration on `M^T M`.
const SVD_CUTOFF: usize = 512;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

/// Largest singular value of `m`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows().max(m.ncols()) <= SVD_CUTOFF {
        m.singular_values().max()
    } else {
        power_iteration_norm(m)
    }
}

fn power_iteration_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    // Fixed deterministic start; re-randomize only on stagnation.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64) / (n as f64));
    v /= v.norm();
    let mut prev = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.transpose() * (m * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let est = norm.sqrt();
        if (est - prev).abs() <= POWER_TOL * est.max(1.0) {
            return est;
        }
        prev = est;
    }
    prev
}

/// Extreme eigenvalues `(min, max)` of the symmetric part `(M + M^T)/2`.
pub fn symmetric_part_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Sum with pairwise splitting; the result does not depend on how callers
/// might have produced the slice in parallel, and rounding error stays
/// O(log n) instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Sample standard deviation (n - 1 in the denominator).
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&sq) / (values.len() - 1) as f64).sqrt()
}

/// Half-width of the normal-approximation confidence interval on the mean,
/// at `z` standard errors.
pub fn ci_half_width(values: &[f64], z: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    z * sample_std(values) / (values.len() as f64).sqrt()
}

/// Uniform draw from the Euclidean ball of radius `radius` centered at `center`.
pub fn sample_ball(center: &DVector<f64>, radius: f64, rng: &mut DrawRng) -> DVector<f64> {
    let d = center.len();
    let mut dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = dir.norm();
    if norm == 0.0 {
        return center.clone();
    }
    dir /= norm;
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    center + dir * r
}

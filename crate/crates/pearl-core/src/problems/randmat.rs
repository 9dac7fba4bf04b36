//! Random matrices with controlled spectra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::DrawRng;

/// Haar-like random orthogonal matrix: QR of an i.i.d. Gaussian matrix with
/// the signs of Q's columns corrected by the diagonal of R.
pub fn random_orthogonal(d: usize, rng: &mut DrawRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Symmetric matrix `Q diag(lambda) Q^T` with eigenvalues drawn uniformly
/// from `[lo, hi]`. Exactly symmetric by construction.
pub fn random_symmetric_with_spectrum(
    d: usize,
    lo: f64,
    hi: f64,
    rng: &mut DrawRng,
) -> DMatrix<f64> {
    let q = random_orthogonal(d, rng);
    let lambda = DVector::from_fn(d, |_, _| lo + (hi - lo) * rng.random::<f64>());
    let mut m = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
    // Kill rounding asymmetry so the skew constructions below hold exactly.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// Vector with coordinates uniform in `[0, 1)`.
pub fn random_unit_cube_vector(d: usize, rng: &mut DrawRng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random::<f64>())
}

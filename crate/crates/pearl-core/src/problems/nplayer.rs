//! n-player quadratic game with skew-symmetric coupling:
//!
//! `f_{i,m}(x^i; x^{-i}) = 1/2 <x^i, A_{i,m} x^i> + sum_{j != i} <x^i, B_{i,j,m} x^j> + <a_{i,m}, x^i>`
//!
//! with `B_{j,i,m} = -B_{i,j,m}^T`. Under that condition the coupling terms
//! cancel in `<F(x) - F(y), x - y>`, so the joint gradient is strongly
//! monotone with modulus `mu_A` whenever every `A_{i,m} >= mu_A I`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::{BlockLayout, GameProblem, GradientSample, JointAction};
use crate::params::solve_affine_equilibrium;
use crate::problems::minimax::GenerateError;
use crate::problems::randmat::{random_symmetric_with_spectrum, random_unit_cube_vector};
use crate::rng::{DrawRng, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NPlayerSpectrum {
    pub mu_a: f64,
    pub l_a: f64,
    pub l_b: f64,
}

impl Default for NPlayerSpectrum {
    fn default() -> Self {
        Self { mu_a: 1.0, l_a: 2.0, l_b: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NPlayerGeneratorMeta {
    pub seed: u64,
    pub spectrum: NPlayerSpectrum,
}

#[derive(Debug, Clone)]
pub struct NPlayerQuadraticGame {
    layout: BlockLayout,
    n: usize,
    d: usize,
    /// `a_mats[i][m]`
    a_mats: Vec<Vec<DMatrix<f64>>>,
    /// `b_mats[i][j][m]`; the diagonal `i == j` is empty.
    b_mats: Vec<Vec<Vec<DMatrix<f64>>>>,
    /// `a_vecs[i][m]`
    a_vecs: Vec<Vec<DVector<f64>>>,
    avg_a: Vec<DMatrix<f64>>,
    avg_b: Vec<Vec<DMatrix<f64>>>,
    avg_a_vec: Vec<DVector<f64>>,
    /// Certified monotonicity modulus (`mu_a` of the generating spectrum).
    mu_certificate: f64,
    batch_size: usize,
    meta: Option<NPlayerGeneratorMeta>,
}

impl NPlayerQuadraticGame {
    pub fn generate(
        n: usize,
        d: usize,
        n_samples: usize,
        spectrum: NPlayerSpectrum,
        seed: u64,
    ) -> Result<Self, GenerateError> {
        if n < 2 {
            return Err(GenerateError::TooFewPlayers(n));
        }
        if d == 0 {
            return Err(GenerateError::ZeroDim);
        }
        if n_samples == 0 {
            return Err(GenerateError::NoSamples);
        }
        if !(spectrum.mu_a > 0.0 && spectrum.l_a >= spectrum.mu_a) {
            return Err(GenerateError::BadSpectrum { lo: spectrum.mu_a, hi: spectrum.l_a });
        }
        if spectrum.l_b < 0.0 {
            return Err(GenerateError::NegativeCoupling(spectrum.l_b));
        }

        let mut rng = RngStream::new(seed).labeled(1);
        let mut a_mats = vec![Vec::with_capacity(n_samples); n];
        let mut a_vecs = vec![Vec::with_capacity(n_samples); n];
        let mut b_mats = vec![vec![Vec::with_capacity(n_samples); n]; n];
        for _ in 0..n_samples {
            for i in 0..n {
                a_mats[i].push(random_symmetric_with_spectrum(
                    d,
                    spectrum.mu_a,
                    spectrum.l_a,
                    &mut rng,
                ));
                a_vecs[i].push(random_unit_cube_vector(d, &mut rng));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let b = random_symmetric_with_spectrum(d, 0.0, spectrum.l_b, &mut rng);
                    b_mats[j][i].push(-b.transpose());
                    b_mats[i][j].push(b);
                }
            }
        }
        Self::from_samples(
            a_mats,
            b_mats,
            a_vecs,
            spectrum.mu_a,
            Some(NPlayerGeneratorMeta { seed, spectrum }),
        )
    }

    /// Instance from explicit data. `b_mats[i][j]` must hold the per-sample
    /// coupling blocks for every ordered pair `i != j` (and stay empty on the
    /// diagonal); the skew condition is the caller's responsibility and is
    /// what `mu_certificate` relies on.
    pub fn from_parts(
        a_mats: Vec<Vec<DMatrix<f64>>>,
        b_mats: Vec<Vec<Vec<DMatrix<f64>>>>,
        a_vecs: Vec<Vec<DVector<f64>>>,
        mu_certificate: f64,
    ) -> Result<Self, GenerateError> {
        Self::from_samples(a_mats, b_mats, a_vecs, mu_certificate, None)
    }

    fn from_samples(
        a_mats: Vec<Vec<DMatrix<f64>>>,
        b_mats: Vec<Vec<Vec<DMatrix<f64>>>>,
        a_vecs: Vec<Vec<DVector<f64>>>,
        mu_certificate: f64,
        meta: Option<NPlayerGeneratorMeta>,
    ) -> Result<Self, GenerateError> {
        let n = a_mats.len();
        if n < 2 {
            return Err(GenerateError::TooFewPlayers(n));
        }
        if a_mats[0].is_empty() {
            return Err(GenerateError::NoSamples);
        }
        let d = a_mats[0][0].nrows();
        if d == 0 {
            return Err(GenerateError::ZeroDim);
        }
        let layout = BlockLayout::uniform(n, d).expect("positive blocks");
        let avg_a: Vec<_> = a_mats.iter().map(|per_m| average(per_m)).collect();
        let avg_a_vec: Vec<_> = a_vecs.iter().map(|per_m| average_v(per_m)).collect();
        let avg_b: Vec<Vec<_>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            DMatrix::zeros(d, d)
                        } else {
                            average(&b_mats[i][j])
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            layout,
            n,
            d,
            a_mats,
            b_mats,
            a_vecs,
            avg_a,
            avg_b,
            avg_a_vec,
            mu_certificate,
            batch_size: 1,
            meta,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self, GenerateError> {
        if batch_size == 0 {
            return Err(GenerateError::ZeroBatch);
        }
        self.batch_size = batch_size;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: NPlayerGeneratorMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.a_mats[0].len()
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn meta(&self) -> Option<&NPlayerGeneratorMeta> {
        self.meta.as_ref()
    }

    /// Monotonicity modulus guaranteed by construction.
    pub fn mu_certificate(&self) -> f64 {
        self.mu_certificate
    }

    pub fn coupling_samples(&self, i: usize, j: usize) -> &[DMatrix<f64>] {
        &self.b_mats[i][j]
    }

    pub fn own_samples(&self, i: usize) -> (&[DMatrix<f64>], &[DVector<f64>]) {
        (&self.a_mats[i], &self.a_vecs[i])
    }

    /// Largest skew-condition defect `max |B_{j,i,m} + B_{i,j,m}^T|` over all
    /// pairs and samples; zero for generated instances.
    pub fn skew_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for m in 0..self.n_samples() {
                    let defect = (&self.b_mats[j][i][m] + self.b_mats[i][j][m].transpose())
                        .abs()
                        .max();
                    worst = worst.max(defect);
                }
            }
        }
        worst
    }

    fn component_grad(&self, player: usize, m: usize, x: &JointAction) -> DVector<f64> {
        let xi = DVector::from_column_slice(x.block(player));
        let mut g = &self.a_mats[player][m] * xi + &self.a_vecs[player][m];
        for j in 0..self.n {
            if j != player {
                let xj = DVector::from_column_slice(x.block(j));
                g += &self.b_mats[player][j][m] * xj;
            }
        }
        g
    }
}

fn average(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc += m;
    }
    acc / mats.len() as f64
}

fn average_v(vecs: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = vecs[0].clone();
    for v in &vecs[1..] {
        acc += v;
    }
    acc / vecs.len() as f64
}

impl GameProblem for NPlayerQuadraticGame {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn objective(&self, player: usize, x: &JointAction) -> f64 {
        let xi = DVector::from_column_slice(x.block(player));
        let mut value = 0.5 * xi.dot(&(&self.avg_a[player] * &xi)) + self.avg_a_vec[player].dot(&xi);
        for j in 0..self.n {
            if j != player {
                let xj = DVector::from_column_slice(x.block(j));
                value += xi.dot(&(&self.avg_b[player][j] * xj));
            }
        }
        value
    }

    fn grad(&self, player: usize, x: &JointAction) -> DVector<f64> {
        let xi = DVector::from_column_slice(x.block(player));
        let mut g = &self.avg_a[player] * xi + &self.avg_a_vec[player];
        for j in 0..self.n {
            if j != player {
                let xj = DVector::from_column_slice(x.block(j));
                g += &self.avg_b[player][j] * xj;
            }
        }
        g
    }

    fn stoch_grad(&self, player: usize, x: &JointAction, rng: &mut DrawRng) -> GradientSample {
        let draw_id = rng.key();
        let mut acc = DVector::zeros(self.d);
        for _ in 0..self.batch_size {
            let m = rng.random_range(0..self.n_samples());
            acc += self.component_grad(player, m, x);
        }
        GradientSample { player, value: acc / self.batch_size as f64, draw_id }
    }

    fn equilibrium(&self) -> Option<JointAction> {
        solve_affine_equilibrium(self).ok().map(|(x, _)| x)
    }

    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let (n, d) = (self.n, self.d);
        let mut m = DMatrix::zeros(n * d, n * d);
        let mut b = DVector::zeros(n * d);
        for i in 0..n {
            m.view_mut((i * d, i * d), (d, d)).copy_from(&self.avg_a[i]);
            for j in 0..n {
                if j != i {
                    m.view_mut((i * d, j * d), (d, d)).copy_from(&self.avg_b[i][j]);
                }
            }
            b.rows_mut(i * d, d).copy_from(&self.avg_a_vec[i]);
        }
        Some((m, b))
    }

    fn sigma_bound(&self) -> Option<Vec<f64>> {
        if self.n_samples() == 1 {
            Some(vec![0.0; self.n])
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::joint_gradient;

    #[test]
    fn skew_condition_holds_exactly() {
        let g =
            NPlayerQuadraticGame::generate(5, 10, 20, NPlayerSpectrum::default(), 42).unwrap();
        assert_eq!(g.skew_defect(), 0.0);
    }

    #[test]
    fn strong_monotonicity_with_certified_modulus() {
        let g = NPlayerQuadraticGame::generate(5, 10, 100, NPlayerSpectrum::default(), 7).unwrap();
        let layout = g.layout().clone();
        let stream = RngStream::new(99);
        for k in 0..1000 {
            let mut rng = stream.labeled(k);
            let x = JointAction::new(
                layout.clone(),
                DVector::from_fn(layout.total_dim(), |_, _| 20.0 * rng.random::<f64>() - 10.0),
            )
            .unwrap();
            let y = JointAction::new(
                layout.clone(),
                DVector::from_fn(layout.total_dim(), |_, _| 20.0 * rng.random::<f64>() - 10.0),
            )
            .unwrap();
            let fx = joint_gradient(&g, &x).unwrap();
            let fy = joint_gradient(&g, &y).unwrap();
            let diff = x.values() - y.values();
            let inner = (fx - fy).dot(&diff);
            let bound = g.mu_certificate() * diff.norm_squared();
            assert!(inner >= bound - 1e-9, "inner {inner} < mu bound {bound}");
        }
    }

    #[test]
    fn tiny_instance_system_matrix() {
        // n = 2, d = 1, A_1 = (2), A_2 = (3), B_12 = (5) gives the joint
        // system matrix [[2, 5], [-5, 3]].
        let a_mats = vec![
            vec![DMatrix::from_element(1, 1, 2.0)],
            vec![DMatrix::from_element(1, 1, 3.0)],
        ];
        let mut b_mats = vec![vec![Vec::new(), Vec::new()], vec![Vec::new(), Vec::new()]];
        b_mats[0][1].push(DMatrix::from_element(1, 1, 5.0));
        b_mats[1][0].push(DMatrix::from_element(1, 1, -5.0));
        let a_vecs = vec![vec![DVector::from_element(1, 1.0)], vec![DVector::from_element(1, -2.0)]];
        let g = NPlayerQuadraticGame::from_parts(a_mats, b_mats, a_vecs, 2.0).unwrap();
        let (m, b) = g.affine_form().unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, 5.0, -5.0, 3.0]));
        assert_eq!(b, DVector::from_row_slice(&[1.0, -2.0]));

        // Equilibrium against a brute-force grid refinement on ||F||.
        let eq = g.equilibrium().unwrap();
        let brute = brute_force_equilibrium(&g, 4.0);
        for i in 0..2 {
            assert!(
                (eq.values()[i] - brute[i]).abs() < 1e-6,
                "solver {} vs brute {}",
                eq.values()[i],
                brute[i]
            );
        }
    }

    /// Nested grid search shrinking around the argmin of ||F(x)||.
    fn brute_force_equilibrium(g: &NPlayerQuadraticGame, half_width: f64) -> Vec<f64> {
        let mut center = vec![0.0, 0.0];
        let mut w = half_width;
        for _ in 0..40 {
            let steps = 8;
            let mut best = (f64::INFINITY, center.clone());
            for i in 0..=steps {
                for j in 0..=steps {
                    let cand = vec![
                        center[0] - w + 2.0 * w * i as f64 / steps as f64,
                        center[1] - w + 2.0 * w * j as f64 / steps as f64,
                    ];
                    let x = JointAction::from_slice(g.layout().clone(), &cand).unwrap();
                    let norm = joint_gradient(g, &x).unwrap().norm();
                    if norm < best.0 {
                        best = (norm, cand);
                    }
                }
            }
            center = best.1;
            w /= 2.0;
        }
        center
    }

    use crate::rng::RngStream;
}

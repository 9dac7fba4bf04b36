//! Two-player zero-sum quadratic game over a finite sum of sampled
//! quadratics: player 1 minimizes `L(u, v)` and player 2 minimizes `-L(u, v)`
//! where
//!
//! `L_m(u, v) = 1/2 <u, A_m u> + <u, B_m v> - 1/2 <v, C_m v> + <a_m, u> - <c_m, v>`
//!
//! and `L` is the average over `m = 1..M`. The stochastic oracle samples
//! uniformly from the sum (mini-batch with replacement).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{BlockLayout, GameProblem, GradientSample, JointAction};
use crate::params::solve_affine_equilibrium;
use crate::problems::randmat::{random_symmetric_with_spectrum, random_unit_cube_vector};
use crate::rng::{DrawRng, RngStream};

/// Eigenvalue intervals for the sampled matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSpectrum {
    pub mu_a: f64,
    pub l_a: f64,
    pub l_b: f64,
    pub mu_c: f64,
    pub l_c: f64,
}

impl Default for MinimaxSpectrum {
    /// Strongly convex-concave blocks with a dominant coupling, the regime
    /// where the playerwise smoothness constants sit well below the joint
    /// Lipschitz constant.
    fn default() -> Self {
        Self { mu_a: 1.0, l_a: 2.0, l_b: 15.0, mu_c: 1.0, l_c: 2.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("spectrum interval [{lo}, {hi}] must satisfy 0 < lo <= hi")]
    BadSpectrum { lo: f64, hi: f64 },
    #[error("coupling bound must be nonnegative, got {0}")]
    NegativeCoupling(f64),
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("sample count M must be at least 1")]
    NoSamples,
    #[error("player count must be at least 2, got {0}")]
    TooFewPlayers(usize),
    #[error("batch size must be at least 1")]
    ZeroBatch,
}

fn check_interval(lo: f64, hi: f64) -> Result<(), GenerateError> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(GenerateError::BadSpectrum { lo, hi });
    }
    Ok(())
}

/// Generation record kept for serialization / provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxGeneratorMeta {
    pub seed: u64,
    pub spectrum: MinimaxSpectrum,
}

#[derive(Debug, Clone)]
pub struct QuadraticMinimaxGame {
    layout: BlockLayout,
    d: usize,
    a_mats: Vec<DMatrix<f64>>,
    b_mats: Vec<DMatrix<f64>>,
    c_mats: Vec<DMatrix<f64>>,
    a_vecs: Vec<DVector<f64>>,
    c_vecs: Vec<DVector<f64>>,
    avg_a: DMatrix<f64>,
    avg_b: DMatrix<f64>,
    avg_c: DMatrix<f64>,
    avg_a_vec: DVector<f64>,
    avg_c_vec: DVector<f64>,
    batch_size: usize,
    meta: Option<MinimaxGeneratorMeta>,
}

fn average_mats(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc += m;
    }
    acc / mats.len() as f64
}

fn average_vecs(vecs: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = vecs[0].clone();
    for v in &vecs[1..] {
        acc += v;
    }
    acc / vecs.len() as f64
}

impl QuadraticMinimaxGame {
    /// Random instance: symmetric `A_m`, `B_m`, `C_m` with eigenvalues drawn
    /// uniformly from `[mu_a, l_a]`, `[0, l_b]`, `[mu_c, l_c]` on random
    /// orthogonal bases, and `a_m`, `c_m` uniform in `[0, 1)^d`.
    /// Deterministic in `seed`.
    pub fn generate(
        d: usize,
        n_samples: usize,
        spectrum: MinimaxSpectrum,
        seed: u64,
    ) -> Result<Self, GenerateError> {
        if d == 0 {
            return Err(GenerateError::ZeroDim);
        }
        if n_samples == 0 {
            return Err(GenerateError::NoSamples);
        }
        check_interval(spectrum.mu_a, spectrum.l_a)?;
        check_interval(spectrum.mu_c, spectrum.l_c)?;
        if spectrum.l_b < 0.0 {
            return Err(GenerateError::NegativeCoupling(spectrum.l_b));
        }

        let mut rng = RngStream::new(seed).labeled(0);
        let mut a_mats = Vec::with_capacity(n_samples);
        let mut b_mats = Vec::with_capacity(n_samples);
        let mut c_mats = Vec::with_capacity(n_samples);
        let mut a_vecs = Vec::with_capacity(n_samples);
        let mut c_vecs = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            a_mats.push(random_symmetric_with_spectrum(d, spectrum.mu_a, spectrum.l_a, &mut rng));
            b_mats.push(random_symmetric_with_spectrum(d, 0.0, spectrum.l_b, &mut rng));
            c_mats.push(random_symmetric_with_spectrum(d, spectrum.mu_c, spectrum.l_c, &mut rng));
            a_vecs.push(random_unit_cube_vector(d, &mut rng));
            c_vecs.push(random_unit_cube_vector(d, &mut rng));
        }
        Self::from_samples(
            a_mats,
            b_mats,
            c_mats,
            a_vecs,
            c_vecs,
            Some(MinimaxGeneratorMeta { seed, spectrum }),
        )
    }

    /// Instance from explicit per-sample data.
    pub fn from_parts(
        a_mats: Vec<DMatrix<f64>>,
        b_mats: Vec<DMatrix<f64>>,
        c_mats: Vec<DMatrix<f64>>,
        a_vecs: Vec<DVector<f64>>,
        c_vecs: Vec<DVector<f64>>,
    ) -> Result<Self, GenerateError> {
        Self::from_samples(a_mats, b_mats, c_mats, a_vecs, c_vecs, None)
    }

    /// The scalar saddle `L(u, v) = (a/2) u^2 + b u v - (c/2) v^2`.
    pub fn scalar(a: f64, b: f64, c: f64) -> Self {
        Self::from_parts(
            vec![DMatrix::from_element(1, 1, a)],
            vec![DMatrix::from_element(1, 1, b)],
            vec![DMatrix::from_element(1, 1, c)],
            vec![DVector::zeros(1)],
            vec![DVector::zeros(1)],
        )
        .expect("scalar game is well-formed")
    }

    fn from_samples(
        a_mats: Vec<DMatrix<f64>>,
        b_mats: Vec<DMatrix<f64>>,
        c_mats: Vec<DMatrix<f64>>,
        a_vecs: Vec<DVector<f64>>,
        c_vecs: Vec<DVector<f64>>,
        meta: Option<MinimaxGeneratorMeta>,
    ) -> Result<Self, GenerateError> {
        if a_mats.is_empty() {
            return Err(GenerateError::NoSamples);
        }
        let d = a_mats[0].nrows();
        if d == 0 {
            return Err(GenerateError::ZeroDim);
        }
        let layout = BlockLayout::uniform(2, d).expect("two positive blocks");
        let avg_a = average_mats(&a_mats);
        let avg_b = average_mats(&b_mats);
        let avg_c = average_mats(&c_mats);
        let avg_a_vec = average_vecs(&a_vecs);
        let avg_c_vec = average_vecs(&c_vecs);
        Ok(Self {
            layout,
            d,
            a_mats,
            b_mats,
            c_mats,
            a_vecs,
            c_vecs,
            avg_a,
            avg_b,
            avg_c,
            avg_a_vec,
            avg_c_vec,
            batch_size: 1,
            meta,
        })
    }

    /// Mini-batch size of the stochastic oracle (default 1).
    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self, GenerateError> {
        if batch_size == 0 {
            return Err(GenerateError::ZeroBatch);
        }
        self.batch_size = batch_size;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: MinimaxGeneratorMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.a_mats.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn meta(&self) -> Option<&MinimaxGeneratorMeta> {
        self.meta.as_ref()
    }

    pub fn samples(
        &self,
    ) -> (&[DMatrix<f64>], &[DMatrix<f64>], &[DMatrix<f64>], &[DVector<f64>], &[DVector<f64>]) {
        (&self.a_mats, &self.b_mats, &self.c_mats, &self.a_vecs, &self.c_vecs)
    }

    pub fn averages(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>, &DVector<f64>, &DVector<f64>)
    {
        (&self.avg_a, &self.avg_b, &self.avg_c, &self.avg_a_vec, &self.avg_c_vec)
    }

    fn split(&self, x: &JointAction) -> (DVector<f64>, DVector<f64>) {
        let u = DVector::from_column_slice(x.block(0));
        let v = DVector::from_column_slice(x.block(1));
        (u, v)
    }

    fn saddle_value(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.avg_a * u)) + u.dot(&(&self.avg_b * v))
            - 0.5 * v.dot(&(&self.avg_c * v))
            + self.avg_a_vec.dot(u)
            - self.avg_c_vec.dot(v)
    }

    fn component_grad(&self, player: usize, m: usize, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        if player == 0 {
            &self.a_mats[m] * u + &self.b_mats[m] * v + &self.a_vecs[m]
        } else {
            &self.c_mats[m] * v - self.b_mats[m].transpose() * u + &self.c_vecs[m]
        }
    }
}

impl GameProblem for QuadraticMinimaxGame {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn objective(&self, player: usize, x: &JointAction) -> f64 {
        let (u, v) = self.split(x);
        let value = self.saddle_value(&u, &v);
        if player == 0 {
            value
        } else {
            -value
        }
    }

    fn grad(&self, player: usize, x: &JointAction) -> DVector<f64> {
        let (u, v) = self.split(x);
        if player == 0 {
            &self.avg_a * &u + &self.avg_b * &v + &self.avg_a_vec
        } else {
            &self.avg_c * &v - self.avg_b.transpose() * &u + &self.avg_c_vec
        }
    }

    fn stoch_grad(&self, player: usize, x: &JointAction, rng: &mut DrawRng) -> GradientSample {
        let (u, v) = self.split(x);
        let draw_id = rng.key();
        let mut acc = DVector::zeros(self.d);
        for _ in 0..self.batch_size {
            let m = rng.random_range(0..self.n_samples());
            acc += self.component_grad(player, m, &u, &v);
        }
        GradientSample { player, value: acc / self.batch_size as f64, draw_id }
    }

    fn equilibrium(&self) -> Option<JointAction> {
        solve_affine_equilibrium(self).ok().map(|(x, _)| x)
    }

    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let d = self.d;
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.avg_a);
        m.view_mut((0, d), (d, d)).copy_from(&self.avg_b);
        m.view_mut((d, 0), (d, d)).copy_from(&(-self.avg_b.transpose()));
        m.view_mut((d, d), (d, d)).copy_from(&self.avg_c);
        let mut b = DVector::zeros(2 * d);
        b.rows_mut(0, d).copy_from(&self.avg_a_vec);
        b.rows_mut(d, d).copy_from(&self.avg_c_vec);
        Some((m, b))
    }

    fn sigma_bound(&self) -> Option<Vec<f64>> {
        if self.n_samples() == 1 {
            // A single summand: the draw always equals the mean.
            Some(vec![0.0, 0.0])
        } else {
            None
        }
    }
}

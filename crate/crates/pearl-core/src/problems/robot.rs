//! Mobile robot formation control as an n-player game. Robot `i` picks a
//! scalar position and pays
//!
//! `f_i(x) = (a_i/2) (x^i - anchor_i)^2 + (b_i/2) sum_j (x^i - x^j - h_ij)^2`,
//!
//! an anchor-attraction cost plus relative-displacement costs against every
//! other robot. Gradients are observed through additive Gaussian noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{BlockLayout, GameProblem, GradientSample, JointAction};
use crate::params::solve_affine_equilibrium;
use crate::rng::DrawRng;

#[derive(Debug, Error, PartialEq)]
pub enum RobotError {
    #[error("field lengths disagree with the robot count")]
    ShapeMismatch,
    #[error("anchor gain a_{0} must be positive")]
    NonPositiveGain(usize),
    #[error("displacement gain b_{0} must be nonnegative")]
    NegativeGain(usize),
    #[error("self-displacement h_{0}{0} must be zero")]
    NonZeroSelfDisplacement(usize),
    #[error("noise variance must be nonnegative")]
    NegativeVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotControlGame {
    #[serde(skip, default = "scalar_layout_placeholder")]
    layout: BlockLayout,
    a: Vec<f64>,
    b: Vec<f64>,
    anchors: Vec<f64>,
    /// Designated displacements, row-major `h[i][j]`.
    h: Vec<Vec<f64>>,
    /// Per-coordinate variance of the additive Gaussian gradient noise.
    noise_variance: f64,
}

fn scalar_layout_placeholder() -> BlockLayout {
    BlockLayout::uniform(1, 1).expect("placeholder layout")
}

impl RobotControlGame {
    pub fn new(
        a: Vec<f64>,
        b: Vec<f64>,
        anchors: Vec<f64>,
        h: Vec<Vec<f64>>,
        noise_variance: f64,
    ) -> Result<Self, RobotError> {
        let n = a.len();
        if b.len() != n || anchors.len() != n || h.len() != n || h.iter().any(|r| r.len() != n) {
            return Err(RobotError::ShapeMismatch);
        }
        for (i, &ai) in a.iter().enumerate() {
            if !(ai > 0.0) {
                return Err(RobotError::NonPositiveGain(i));
            }
        }
        for (i, &bi) in b.iter().enumerate() {
            if bi < 0.0 {
                return Err(RobotError::NegativeGain(i));
            }
        }
        for (i, row) in h.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(RobotError::NonZeroSelfDisplacement(i));
            }
        }
        if noise_variance < 0.0 {
            return Err(RobotError::NegativeVariance);
        }
        let layout = BlockLayout::uniform(n, 1).expect("positive scalar blocks");
        Ok(Self { layout, a, b, anchors, h, noise_variance })
    }

    /// The five-robot benchmark: `a_i = 10 + i/6`, `b_i = i/6` (1-based `i`),
    /// anchors `(1, -4, 8, -9, 13)`, the fixed displacement table below, and
    /// gradient noise of variance 100.
    pub fn benchmark() -> Self {
        let a = (1..=5).map(|i| 10.0 + i as f64 / 6.0).collect();
        let b = (1..=5).map(|i| i as f64 / 6.0).collect();
        let anchors = vec![1.0, -4.0, 8.0, -9.0, 13.0];
        let h = vec![
            vec![0.0, 5.0, -7.0, 9.0, -8.0],
            vec![-5.0, 0.0, -6.0, 2.0, -9.0],
            vec![7.0, 6.0, 0.0, 7.0, -4.0],
            vec![-9.0, -2.0, -7.0, 0.0, -2.0],
            vec![8.0, 9.0, 4.0, 2.0, 0.0],
        ];
        Self::new(a, b, anchors, h, 100.0).expect("benchmark constants are valid")
    }

    pub fn robots(&self) -> usize {
        self.a.len()
    }

    pub fn gains(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn displacement(&self, i: usize, j: usize) -> f64 {
        self.h[i][j]
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    fn restore_layout(&mut self) {
        self.layout = BlockLayout::uniform(self.a.len(), 1).expect("positive scalar blocks");
    }

    /// Rebuild derived state after deserialization.
    pub fn validated(mut self) -> Result<Self, RobotError> {
        self.restore_layout();
        Self::new(self.a, self.b, self.anchors, self.h, self.noise_variance)
    }
}

impl GameProblem for RobotControlGame {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn objective(&self, player: usize, x: &JointAction) -> f64 {
        let xs = x.as_slice();
        let xi = xs[player];
        let anchor_cost = 0.5 * self.a[player] * (xi - self.anchors[player]).powi(2);
        let mut displacement_cost = 0.0;
        for j in 0..self.robots() {
            let delta = xi - xs[j] - self.h[player][j];
            displacement_cost += delta * delta;
        }
        anchor_cost + 0.5 * self.b[player] * displacement_cost
    }

    fn grad(&self, player: usize, x: &JointAction) -> DVector<f64> {
        let xs = x.as_slice();
        let xi = xs[player];
        let mut g = self.a[player] * (xi - self.anchors[player]);
        for j in 0..self.robots() {
            if j != player {
                g += self.b[player] * (xi - xs[j] - self.h[player][j]);
            }
        }
        DVector::from_element(1, g)
    }

    fn stoch_grad(&self, player: usize, x: &JointAction, rng: &mut DrawRng) -> GradientSample {
        let draw_id = rng.key();
        let mut value = self.grad(player, x);
        let sigma = self.noise_variance.sqrt();
        for v in value.iter_mut() {
            *v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        GradientSample { player, value, draw_id }
    }

    fn equilibrium(&self) -> Option<JointAction> {
        solve_affine_equilibrium(self).ok().map(|(x, _)| x)
    }

    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let n = self.robots();
        let mut m = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for i in 0..n {
            m[(i, i)] = self.a[i] + (n as f64 - 1.0) * self.b[i];
            let mut offset = -self.a[i] * self.anchors[i];
            for j in 0..n {
                if j != i {
                    m[(i, j)] = -self.b[i];
                    offset -= self.b[i] * self.h[i][j];
                }
            }
            b[i] = offset;
        }
        Some((m, b))
    }

    fn sigma_bound(&self) -> Option<Vec<f64>> {
        // d_i = 1, so sigma_i^2 equals the per-coordinate variance.
        Some(vec![self.noise_variance.sqrt(); self.robots()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::joint_gradient;

    #[test]
    fn benchmark_constants() {
        let g = RobotControlGame::benchmark();
        assert_eq!(g.displacement(0, 1), 5.0);
        assert_eq!(g.displacement(1, 0), -5.0);
        assert_eq!(g.displacement(4, 2), 4.0);
        // Robot 3 (1-based): a = 10.5, b = 0.5.
        assert_eq!(g.gains().0[2], 10.5);
        assert_eq!(g.gains().1[2], 0.5);
        for i in 0..5 {
            assert_eq!(g.displacement(i, i), 0.0);
        }
    }

    #[test]
    fn gradient_matches_scalar_evaluation_at_anchors() {
        let g = RobotControlGame::benchmark();
        let x = JointAction::from_slice(g.layout().clone(), g.anchors()).unwrap();
        let f = joint_gradient(&g, &x).unwrap();
        // Independent scalar evaluation of a_i (x_i - anchor_i) + b_i sum_j (x_i - x_j - h_ij).
        let (a, b) = g.gains();
        for i in 0..5 {
            let mut expect = a[i] * (g.anchors()[i] - g.anchors()[i]);
            for j in 0..5 {
                expect += b[i] * (g.anchors()[i] - g.anchors()[j] - g.displacement(i, j));
            }
            assert!((f[i] - expect).abs() < 1e-12, "player {i}: {} vs {expect}", f[i]);
        }
        assert!(f.norm() > 1.0, "anchor vector is not the equilibrium");
    }

    #[test]
    fn equilibrium_residual_is_tiny() {
        let g = RobotControlGame::benchmark();
        let eq = g.equilibrium().unwrap();
        let res = joint_gradient(&g, &eq).unwrap().norm();
        assert!(res <= 1e-10, "residual {res}");
    }

    #[test]
    fn rejects_nonzero_self_displacement() {
        let mut h = vec![vec![0.0; 2]; 2];
        h[1][1] = 3.0;
        let err = RobotControlGame::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], h, 0.0)
            .unwrap_err();
        assert_eq!(err, RobotError::NonZeroSelfDisplacement(1));
    }
}

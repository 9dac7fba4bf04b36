//! Two-player game whose joint gradient satisfies the star-shaped
//! monotonicity/cocoercivity conditions without being monotone, Lipschitz, or
//! cocoercive. With `phi(t) = mu + (ell - mu) sin^2 t`:
//!
//! `f_1(u; v) = (u^2/2) phi(v)`, `f_2(v; u) = (v^2/2) phi(u)`,
//!
//! so `F(u, v) = (u phi(v), v phi(u))` with the unique equilibrium at the
//! origin. Both local curvatures live in `[mu, ell]`, yet the symmetrized
//! Jacobian goes indefinite far from the origin.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{BlockLayout, GameProblem, GradientSample, JointAction, ProblemParameters};
use crate::rng::DrawRng;

#[derive(Debug, Error, PartialEq)]
pub enum SineGameError {
    #[error("need 0 < mu < ell, got mu = {mu}, ell = {ell}")]
    BadModuli { mu: f64, ell: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineNonCocoerciveGame {
    #[serde(skip, default = "pair_layout_placeholder")]
    layout: BlockLayout,
    mu: f64,
    ell: f64,
}

fn pair_layout_placeholder() -> BlockLayout {
    BlockLayout::uniform(2, 1).expect("placeholder layout")
}

impl SineNonCocoerciveGame {
    pub fn new(mu: f64, ell: f64) -> Result<Self, SineGameError> {
        if !(0.0 < mu && mu < ell) {
            return Err(SineGameError::BadModuli { mu, ell });
        }
        Ok(Self { layout: pair_layout_placeholder(), mu, ell })
    }

    pub fn moduli(&self) -> (f64, f64) {
        (self.mu, self.ell)
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.mu + (self.ell - self.mu) * t.sin().powi(2)
    }

    fn phi_prime(&self, t: f64) -> f64 {
        (self.ell - self.mu) * (2.0 * t).sin()
    }

    /// `det(DF + DF^T)` at `(u, v)`, evaluated from the exact Jacobian.
    /// A negative value certifies that `F` is not monotone.
    pub fn jacobian_symmetrized_det(&self, u: f64, v: f64) -> f64 {
        let diag_u = 2.0 * self.phi(v);
        let diag_v = 2.0 * self.phi(u);
        let off = u * self.phi_prime(v) + v * self.phi_prime(u);
        diag_u * diag_v - off * off
    }

    /// Closed-form witness value `4 ell^2 - 4 (ell - mu)^2 ((2N + 1/2) pi)^2`
    /// used as the non-monotonicity certificate for the diagonal family
    /// `u = v = (2N + 1/2) pi`; negative once `N` is large enough.
    pub fn witness_value(&self, n_index: u32) -> f64 {
        let t = (2.0 * n_index as f64 + 0.5) * std::f64::consts::PI;
        4.0 * self.ell * self.ell - 4.0 * (self.ell - self.mu).powi(2) * t * t
    }

    /// A concrete non-monotonicity witness from the exact Jacobian: the point
    /// `u = v = (2N + 1/4) pi`, where `sin(2t) = 1` makes the off-diagonal of
    /// `DF + DF^T` grow linearly in `t` while the diagonal stays bounded.
    pub fn exact_witness_point(&self, n_index: u32) -> (f64, f64) {
        let t = (2.0 * n_index as f64 + 0.25) * std::f64::consts::PI;
        (t, t)
    }
}

impl GameProblem for SineNonCocoerciveGame {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn objective(&self, player: usize, x: &JointAction) -> f64 {
        let (u, v) = (x.as_slice()[0], x.as_slice()[1]);
        if player == 0 {
            0.5 * u * u * self.phi(v)
        } else {
            0.5 * v * v * self.phi(u)
        }
    }

    fn grad(&self, player: usize, x: &JointAction) -> DVector<f64> {
        let (u, v) = (x.as_slice()[0], x.as_slice()[1]);
        let g = if player == 0 { u * self.phi(v) } else { v * self.phi(u) };
        DVector::from_element(1, g)
    }

    fn stoch_grad(&self, player: usize, x: &JointAction, rng: &mut DrawRng) -> GradientSample {
        // The oracle is exact: no sampling noise in this game.
        GradientSample { player, value: self.grad(player, x), draw_id: rng.key() }
    }

    fn equilibrium(&self) -> Option<JointAction> {
        Some(JointAction::zeros(self.layout.clone()))
    }

    fn analytic_params(&self) -> Option<ProblemParameters> {
        // Local curvature phi stays in [mu, ell], so L_1 = L_2 = ell.
        ProblemParameters::new(self.mu, self.ell, vec![self.ell; 2], vec![0.0; 2]).ok()
    }

    fn sigma_bound(&self) -> Option<Vec<f64>> {
        Some(vec![0.0, 0.0])
    }
}

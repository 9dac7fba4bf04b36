//! Additive Gaussian noise on top of an exact oracle. Used to build test
//! games with exactly known per-player variance: the noise on player `i` is
//! `N(0, sigma_scalar^2 I_{d_i})`, so `sigma_i^2 = d_i * sigma_scalar^2`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::game::{BlockLayout, GameProblem, GradientSample, JointAction, ProblemParameters};
use crate::rng::DrawRng;

#[derive(Debug, Clone)]
pub struct AdditiveGaussianNoise<P> {
    inner: P,
    sigma_scalar: f64,
}

impl<P: GameProblem> AdditiveGaussianNoise<P> {
    pub fn new(inner: P, sigma_scalar: f64) -> Self {
        assert!(sigma_scalar >= 0.0, "noise scale must be nonnegative");
        Self { inner, sigma_scalar }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn sigma_scalar(&self) -> f64 {
        self.sigma_scalar
    }
}

impl<P: GameProblem> GameProblem for AdditiveGaussianNoise<P> {
    fn layout(&self) -> &BlockLayout {
        self.inner.layout()
    }

    fn objective(&self, player: usize, x: &JointAction) -> f64 {
        self.inner.objective(player, x)
    }

    fn grad(&self, player: usize, x: &JointAction) -> DVector<f64> {
        self.inner.grad(player, x)
    }

    fn stoch_grad(&self, player: usize, x: &JointAction, rng: &mut DrawRng) -> GradientSample {
        let draw_id = rng.key();
        let mut value = self.inner.grad(player, x);
        for v in value.iter_mut() {
            *v += self.sigma_scalar * rng.sample::<f64, _>(StandardNormal);
        }
        GradientSample { player, value, draw_id }
    }

    fn equilibrium(&self) -> Option<JointAction> {
        self.inner.equilibrium()
    }

    fn analytic_params(&self) -> Option<ProblemParameters> {
        let base = self.inner.analytic_params()?;
        base.with_sigma(self.sigma_bound()?).ok()
    }

    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.inner.affine_form()
    }

    fn sigma_bound(&self) -> Option<Vec<f64>> {
        let layout = self.inner.layout();
        Some(
            (0..layout.n())
                .map(|i| self.sigma_scalar * (layout.dim(i) as f64).sqrt())
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::minimax::QuadraticMinimaxGame;
    use crate::rng::RngStream;

    #[test]
    fn noise_is_unbiased_and_scaled() {
        let game = AdditiveGaussianNoise::new(QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0), 0.5);
        let x = JointAction::ones(game.layout().clone());
        let exact = game.grad(0, &x);
        let stream = RngStream::new(3);
        let n = 40_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for k in 0..n {
            let mut rng = stream.draw(0, k, 0);
            let dev = game.stoch_grad(0, &x, &mut rng).value[0] - exact[0];
            sum += dev;
            sq += dev * dev;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64;
        assert!(mean.abs() < 4.0 * 0.5 / (n as f64).sqrt(), "bias {mean}");
        assert!((var - 0.25).abs() < 0.01, "variance {var}");
        assert_eq!(game.sigma_bound(), Some(vec![0.5, 0.5]));
    }
}

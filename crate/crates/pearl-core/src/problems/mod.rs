//! Concrete game instances: the two-player quadratic saddle, the n-player
//! skew-coupled quadratic game, the mobile-robot control game, and the
//! non-cocoercive sine game, plus their generators and file format.

pub mod file;
pub mod minimax;
pub mod noise;
pub mod nplayer;
pub mod randmat;
pub mod robot;
pub mod sine;

use nalgebra::{DMatrix, DVector};

use crate::game::{BlockLayout, GameProblem, GradientSample, JointAction, ProblemParameters};
use crate::rng::DrawRng;

pub use file::{ProblemFile, ProblemFileError};
pub use minimax::{GenerateError, MinimaxSpectrum, QuadraticMinimaxGame};
pub use noise::AdditiveGaussianNoise;
pub use nplayer::{NPlayerQuadraticGame, NPlayerSpectrum};
pub use robot::RobotControlGame;
pub use sine::SineNonCocoerciveGame;

/// Owned union of the library's problem kinds, mostly used by drivers that
/// pick the game at runtime.
#[derive(Debug, Clone)]
pub enum AnyProblem {
    Minimax(QuadraticMinimaxGame),
    NPlayer(NPlayerQuadraticGame),
    Robot(RobotControlGame),
    Sine(SineNonCocoerciveGame),
}

impl AnyProblem {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyProblem::Minimax(_) => "quad-minimax",
            AnyProblem::NPlayer(_) => "nplayer-quadratic",
            AnyProblem::Robot(_) => "robot-control",
            AnyProblem::Sine(_) => "sine-game",
        }
    }

    fn as_dyn(&self) -> &dyn GameProblem {
        match self {
            AnyProblem::Minimax(g) => g,
            AnyProblem::NPlayer(g) => g,
            AnyProblem::Robot(g) => g,
            AnyProblem::Sine(g) => g,
        }
    }

    pub fn hash(&self) -> String {
        ProblemFile::from_problem(self).hash()
    }
}

impl GameProblem for AnyProblem {
    fn layout(&self) -> &BlockLayout {
        self.as_dyn().layout()
    }

    fn objective(&self, player: usize, x: &JointAction) -> f64 {
        self.as_dyn().objective(player, x)
    }

    fn grad(&self, player: usize, x: &JointAction) -> DVector<f64> {
        self.as_dyn().grad(player, x)
    }

    fn stoch_grad(&self, player: usize, x: &JointAction, rng: &mut DrawRng) -> GradientSample {
        self.as_dyn().stoch_grad(player, x, rng)
    }

    fn equilibrium(&self) -> Option<JointAction> {
        self.as_dyn().equilibrium()
    }

    fn analytic_params(&self) -> Option<ProblemParameters> {
        self.as_dyn().analytic_params()
    }

    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.as_dyn().affine_form()
    }

    fn sigma_bound(&self) -> Option<Vec<f64>> {
        self.as_dyn().sigma_bound()
    }
}

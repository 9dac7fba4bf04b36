//! Joint actions, per-player block layout, and the game oracle contract.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::DrawRng;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("player count must be at least 1")]
    NoPlayers,
    #[error("player dimension {index} must be positive")]
    ZeroDim { index: usize },
    #[error("vector length {got} does not match layout dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("player index {index} out of range (n = {n})")]
    PlayerOutOfRange { index: usize, n: usize },
}

/// Partition of the joint action vector into per-player blocks.
///
/// Player `i` (0-based) owns the contiguous slice of length `dims[i]`
/// starting at `offsets[i] = dims[0] + ... + dims[i-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self, LayoutError> {
        if dims.is_empty() {
            return Err(LayoutError::NoPlayers);
        }
        if let Some(index) = dims.iter().position(|&d| d == 0) {
            return Err(LayoutError::ZeroDim { index });
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for &d in &dims {
            offsets.push(total);
            total += d;
        }
        Ok(Self { dims, offsets, total })
    }

    /// `n` players of equal dimension `d`.
    pub fn uniform(n: usize, d: usize) -> Result<Self, LayoutError> {
        Self::new(vec![d; n])
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    /// Total dimension D of the joint vector.
    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn dim(&self, player: usize) -> usize {
        self.dims[player]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn offset(&self, player: usize) -> usize {
        self.offsets[player]
    }

    pub fn check_player(&self, player: usize) -> Result<(), LayoutError> {
        if player >= self.n() {
            return Err(LayoutError::PlayerOutOfRange { index: player, n: self.n() });
        }
        Ok(())
    }

    pub fn block_range(&self, player: usize) -> std::ops::Range<usize> {
        self.offsets[player]..self.offsets[player] + self.dims[player]
    }
}

/// A joint action: the concatenation `(x^1, ..., x^n)` of all players' blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    layout: BlockLayout,
    values: DVector<f64>,
}

impl JointAction {
    pub fn new(layout: BlockLayout, values: DVector<f64>) -> Result<Self, LayoutError> {
        if values.len() != layout.total_dim() {
            return Err(LayoutError::DimensionMismatch {
                got: values.len(),
                expected: layout.total_dim(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn from_slice(layout: BlockLayout, values: &[f64]) -> Result<Self, LayoutError> {
        Self::new(layout, DVector::from_row_slice(values))
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        let values = DVector::zeros(layout.total_dim());
        Self { layout, values }
    }

    pub fn ones(layout: BlockLayout) -> Self {
        let values = DVector::from_element(layout.total_dim(), 1.0);
        Self { layout, values }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    /// View of player `i`'s own block `x^i`.
    pub fn block(&self, player: usize) -> &[f64] {
        &self.values.as_slice()[self.layout.block_range(player)]
    }

    pub fn block_mut(&mut self, player: usize) -> &mut [f64] {
        let range = self.layout.block_range(player);
        &mut self.values.as_mut_slice()[range]
    }

    /// All other players' actions `x^{-i}`, concatenated in player order.
    pub fn complement(&self, player: usize) -> Vec<f64> {
        let range = self.layout.block_range(player);
        let slice = self.values.as_slice();
        let mut out = Vec::with_capacity(self.layout.total_dim() - self.layout.dim(player));
        out.extend_from_slice(&slice[..range.start]);
        out.extend_from_slice(&slice[range.end..]);
        out
    }

    /// Inverse of (`block`, `complement`): rebuilds the joint vector with
    /// `block` in position `player` and `complement` filling the rest.
    pub fn reassemble(
        layout: BlockLayout,
        player: usize,
        block: &[f64],
        complement: &[f64],
    ) -> Result<Self, LayoutError> {
        layout.check_player(player)?;
        if block.len() != layout.dim(player) {
            return Err(LayoutError::DimensionMismatch {
                got: block.len(),
                expected: layout.dim(player),
            });
        }
        let expected = layout.total_dim() - layout.dim(player);
        if complement.len() != expected {
            return Err(LayoutError::DimensionMismatch { got: complement.len(), expected });
        }
        let range = layout.block_range(player);
        let mut values = Vec::with_capacity(layout.total_dim());
        values.extend_from_slice(&complement[..range.start]);
        values.extend_from_slice(block);
        values.extend_from_slice(&complement[range.start..]);
        Self::from_slice(layout, &values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Squared Euclidean distance to another joint action.
    pub fn sq_dist(&self, other: &JointAction) -> f64 {
        (&self.values - &other.values).norm_squared()
    }
}

/// One stochastic gradient draw for a single player.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub player: usize,
    pub value: DVector<f64>,
    /// Key of the RNG substream consumed, kept for reproducibility audits.
    pub draw_id: u64,
}

/// Constants of a game instance that drive step-size rules and bounds:
/// the quasi-strong monotonicity modulus `mu`, star-cocoercivity modulus
/// `ell`, per-player smoothness constants `L_i`, and gradient noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemParameters {
    pub mu: f64,
    pub ell: f64,
    pub l_per_player: Vec<f64>,
    pub l_max: f64,
    pub sigma_per_player: Vec<f64>,
    /// sigma^2 = sum_i sigma_i^2, the joint-gradient variance bound.
    pub sigma_sq_total: f64,
    /// Condition number kappa = ell / mu (>= 1).
    pub kappa: f64,
    /// q = L_max / sqrt(ell * mu).
    pub q: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParameterError {
    #[error("mu must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("ell must satisfy ell >= mu > 0, got ell = {ell}, mu = {mu}")]
    EllBelowMu { ell: f64, mu: f64 },
    #[error("expected {expected} per-player constants, got {got}")]
    WrongPlayerCount { got: usize, expected: usize },
    #[error("per-player constant must be finite and nonnegative, got {0}")]
    BadConstant(f64),
}

impl ProblemParameters {
    /// Builds the parameter set, deriving `l_max`, `kappa`, `q` and
    /// `sigma_sq_total` from the stored constants.
    pub fn new(
        mu: f64,
        ell: f64,
        l_per_player: Vec<f64>,
        sigma_per_player: Vec<f64>,
    ) -> Result<Self, ParameterError> {
        if !(mu > 0.0) {
            return Err(ParameterError::NonPositiveMu(mu));
        }
        if !(ell >= mu) {
            return Err(ParameterError::EllBelowMu { ell, mu });
        }
        if sigma_per_player.len() != l_per_player.len() {
            return Err(ParameterError::WrongPlayerCount {
                got: sigma_per_player.len(),
                expected: l_per_player.len(),
            });
        }
        for &c in l_per_player.iter().chain(sigma_per_player.iter()) {
            if !c.is_finite() || c < 0.0 {
                return Err(ParameterError::BadConstant(c));
            }
        }
        let l_max = l_per_player.iter().cloned().fold(0.0_f64, f64::max);
        let sigma_sq_total = sigma_per_player.iter().map(|s| s * s).sum();
        Ok(Self {
            mu,
            ell,
            l_per_player,
            l_max,
            sigma_per_player,
            sigma_sq_total,
            kappa: ell / mu,
            q: l_max / (ell * mu).sqrt(),
        })
    }

    /// Same constants with the noise levels replaced (e.g. by empirical
    /// estimates); derived fields are recomputed.
    pub fn with_sigma(&self, sigma_per_player: Vec<f64>) -> Result<Self, ParameterError> {
        Self::new(self.mu, self.ell, self.l_per_player.clone(), sigma_per_player)
    }

    pub fn noiseless(mu: f64, ell: f64, l_per_player: Vec<f64>) -> Result<Self, ParameterError> {
        let n = l_per_player.len();
        Self::new(mu, ell, l_per_player, vec![0.0; n])
    }
}

/// Oracle contract every concrete game provides.
///
/// `grad` is the exact per-player gradient of `f_i` with respect to the
/// player's own block, the other blocks held fixed; `stoch_grad` is an
/// unbiased draw of it. Implementations are immutable after construction
/// and shareable across threads.
pub trait GameProblem: Send + Sync {
    fn layout(&self) -> &BlockLayout;

    /// Value of player `i`'s objective `f_i` at the joint action.
    fn objective(&self, player: usize, x: &JointAction) -> f64;

    /// Exact gradient of `f_i(.; x^{-i})` at `x^i`.
    fn grad(&self, player: usize, x: &JointAction) -> DVector<f64>;

    /// Unbiased stochastic gradient draw.
    fn stoch_grad(&self, player: usize, x: &JointAction, rng: &mut DrawRng) -> GradientSample;

    /// Equilibrium joint action, when the problem can produce one.
    fn equilibrium(&self) -> Option<JointAction> {
        None
    }

    /// Analytically known parameters (used where the joint gradient is not
    /// affine and spectral measurement does not apply).
    fn analytic_params(&self) -> Option<ProblemParameters> {
        None
    }

    /// For affine joint gradients `F(x) = M x + b`, the pair `(M, b)`.
    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        None
    }

    /// Exact per-player noise bounds `sigma_i`, when known in closed form.
    fn sigma_bound(&self) -> Option<Vec<f64>> {
        None
    }
}

/// The joint gradient operator `F(x) = (grad f_1(x^1; x^{-1}), ..., grad f_n(x^n; x^{-n}))`,
/// laid out like `x` itself. Its zero is the game's equilibrium.
pub fn joint_gradient(problem: &dyn GameProblem, x: &JointAction) -> Result<DVector<f64>, LayoutError> {
    let layout = problem.layout();
    if x.layout() != layout {
        return Err(LayoutError::DimensionMismatch {
            got: x.layout().total_dim(),
            expected: layout.total_dim(),
        });
    }
    let mut out = DVector::zeros(layout.total_dim());
    for i in 0..layout.n() {
        let g = problem.grad(i, x);
        out.rows_mut(layout.offset(i), layout.dim(i)).copy_from(&g);
    }
    Ok(out)
}

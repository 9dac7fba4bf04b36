//! Experiment configuration: one self-contained description of a command,
//! its problem instance, and its run parameters. The TOML form written to
//! every artifact directory round-trips losslessly and is what `--replay`
//! consumes.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use pearl_core::engine::{Mode, ScheduleKind};
use pearl_core::game::JointAction;
use pearl_core::problems::minimax::MinimaxSpectrum;
use pearl_core::problems::nplayer::NPlayerSpectrum;
use pearl_core::problems::{
    AnyProblem, NPlayerQuadraticGame, ProblemFile, QuadraticMinimaxGame, RobotControlGame,
    SineNonCocoerciveGame,
};

pub const DEFAULT_TAUS: [u64; 6] = [1, 2, 4, 5, 8, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Run,
    SweepTau,
    TuneGamma,
    Heatmap,
    Verify,
    Params,
}

impl std::fmt::Display for CommandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CommandKind::Run => "run",
            CommandKind::SweepTau => "sweep-tau",
            CommandKind::TuneGamma => "tune-gamma",
            CommandKind::Heatmap => "heatmap",
            CommandKind::Verify => "verify",
            CommandKind::Params => "params",
        };
        write!(f, "{name}")
    }
}

/// Problem selection plus generator parameters (or a problem file path).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    QuadMinimax {
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_mu_a")]
        mu_a: f64,
        #[serde(default = "default_l_a")]
        l_a: f64,
        #[serde(default = "default_l_b_minimax")]
        l_b: f64,
        #[serde(default = "default_mu_a")]
        mu_c: f64,
        #[serde(default = "default_l_a")]
        l_c: f64,
        #[serde(default = "default_problem_seed")]
        seed: u64,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
    NplayerQuadratic {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_mu_a")]
        mu_a: f64,
        #[serde(default = "default_l_a")]
        l_a: f64,
        #[serde(default = "default_l_b_nplayer")]
        l_b: f64,
        #[serde(default = "default_problem_seed")]
        seed: u64,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
    RobotControl {
        #[serde(default = "default_noise_variance")]
        noise_variance: f64,
    },
    SineGame {
        #[serde(default = "default_sine_mu")]
        mu: f64,
        #[serde(default = "default_sine_ell")]
        ell: f64,
    },
    File {
        path: PathBuf,
    },
}

fn default_d() -> usize {
    10
}
fn default_m() -> usize {
    100
}
fn default_n() -> usize {
    5
}
fn default_mu_a() -> f64 {
    1.0
}
fn default_l_a() -> f64 {
    2.0
}
fn default_l_b_minimax() -> f64 {
    15.0
}
fn default_l_b_nplayer() -> f64 {
    5.0
}
fn default_problem_seed() -> u64 {
    7
}
fn default_batch() -> usize {
    1
}
fn default_noise_variance() -> f64 {
    100.0
}
fn default_sine_mu() -> f64 {
    1.0
}
fn default_sine_ell() -> f64 {
    4.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<AnyProblem> {
        match self {
            ProblemSpec::QuadMinimax { d, m, mu_a, l_a, l_b, mu_c, l_c, seed, batch_size } => {
                let spectrum =
                    MinimaxSpectrum { mu_a: *mu_a, l_a: *l_a, l_b: *l_b, mu_c: *mu_c, l_c: *l_c };
                let game = QuadraticMinimaxGame::generate(*d, *m, spectrum, *seed)
                    .map_err(|e| anyhow!("quad-minimax generator: {e}"))?
                    .with_batch_size(*batch_size)
                    .map_err(|e| anyhow!("quad-minimax generator: {e}"))?;
                Ok(AnyProblem::Minimax(game))
            }
            ProblemSpec::NplayerQuadratic { n, d, m, mu_a, l_a, l_b, seed, batch_size } => {
                let spectrum = NPlayerSpectrum { mu_a: *mu_a, l_a: *l_a, l_b: *l_b };
                let game = NPlayerQuadraticGame::generate(*n, *d, *m, spectrum, *seed)
                    .map_err(|e| anyhow!("nplayer-quadratic generator: {e}"))?
                    .with_batch_size(*batch_size)
                    .map_err(|e| anyhow!("nplayer-quadratic generator: {e}"))?;
                Ok(AnyProblem::NPlayer(game))
            }
            ProblemSpec::RobotControl { noise_variance } => {
                let base = RobotControlGame::benchmark();
                let (a, b) = base.gains();
                let h = (0..5)
                    .map(|i| (0..5).map(|j| base.displacement(i, j)).collect())
                    .collect();
                let game = RobotControlGame::new(
                    a.to_vec(),
                    b.to_vec(),
                    base.anchors().to_vec(),
                    h,
                    *noise_variance,
                )
                .map_err(|e| anyhow!("robot-control: {e}"))?;
                Ok(AnyProblem::Robot(game))
            }
            ProblemSpec::SineGame { mu, ell } => Ok(AnyProblem::Sine(
                SineNonCocoerciveGame::new(*mu, *ell).map_err(|e| anyhow!("sine-game: {e}"))?,
            )),
            ProblemSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading problem file {}", path.display()))?;
                let file = ProblemFile::from_json(&text)
                    .with_context(|| format!("parsing problem file {}", path.display()))?;
                Ok(file.into_problem()?)
            }
        }
    }
}

/// Starting point specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    Named(String),
    Values(Vec<f64>),
}

impl Default for X0Spec {
    fn default() -> Self {
        X0Spec::Named("ones".into())
    }
}

impl X0Spec {
    pub fn resolve(&self, problem: &AnyProblem) -> Result<JointAction> {
        use pearl_core::game::GameProblem;
        let layout = problem.layout().clone();
        match self {
            X0Spec::Named(name) => match name.as_str() {
                "ones" => Ok(JointAction::ones(layout)),
                "zeros" => Ok(JointAction::zeros(layout)),
                other => bail!("unknown x0 preset '{other}' (expected 'ones', 'zeros', or a vector)"),
            },
            X0Spec::Values(values) => {
                JointAction::from_slice(layout, values).map_err(|e| anyhow!("x0 vector: {e}"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_tau")]
    pub tau: u64,
    #[serde(default = "default_taus")]
    pub taus: Vec<u64>,
    #[serde(default = "default_rounds")]
    pub rounds: u64,
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// Step size for the `constant` schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Iteration budget for the `horizon` schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_iters: Option<u64>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_run_seed")]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    /// Step-size grid for tune-gamma / heatmap; empty means the default grid.
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default = "default_divergence")]
    pub divergence_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_tol: Option<f64>,
    #[serde(default)]
    pub x0: X0Spec,
    #[serde(default)]
    pub parallel_players: bool,
}

fn default_tau() -> u64 {
    1
}
fn default_taus() -> Vec<u64> {
    DEFAULT_TAUS.to_vec()
}
fn default_rounds() -> u64 {
    100
}
fn default_schedule() -> String {
    "theoretical".into()
}
fn default_mode() -> Mode {
    Mode::Deterministic
}
fn default_run_seed() -> u64 {
    1
}
fn default_replicates() -> u64 {
    5
}
fn default_divergence() -> f64 {
    1e12
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            taus: default_taus(),
            rounds: default_rounds(),
            schedule: default_schedule(),
            gamma: None,
            total_iters: None,
            mode: default_mode(),
            seed: default_run_seed(),
            replicates: default_replicates(),
            gammas: Vec::new(),
            divergence_threshold: default_divergence(),
            convergence_tol: None,
            x0: X0Spec::default(),
            parallel_players: false,
        }
    }
}

impl RunSection {
    pub fn schedule_kind(&self) -> Result<ScheduleKind> {
        match self.schedule.as_str() {
            "theoretical" => Ok(ScheduleKind::Theoretical),
            "theoretical-robot" => Ok(ScheduleKind::TheoreticalRobot),
            "decreasing" => Ok(ScheduleKind::Decreasing),
            "constant" => {
                let gamma = self
                    .gamma
                    .ok_or_else(|| anyhow!("schedule 'constant' needs a gamma value"))?;
                Ok(ScheduleKind::Constant { gamma })
            }
            "horizon" => {
                let total_iters = self
                    .total_iters
                    .ok_or_else(|| anyhow!("schedule 'horizon' needs total_iters"))?;
                Ok(ScheduleKind::Horizon { total_iters })
            }
            other => bail!(
                "unknown schedule '{other}' (expected theoretical, theoretical-robot, \
                 constant, horizon, or decreasing)"
            ),
        }
    }

    /// Grid for tune-gamma: configured values or the default decade grid
    /// `1e-1 .. 1e-6`.
    pub fn tune_grid(&self) -> Vec<f64> {
        if self.gammas.is_empty() {
            (1..=6).map(|k| 10f64.powi(-k)).collect()
        } else {
            self.gammas.clone()
        }
    }

    /// Grid for the heatmap: configured values or 20 log-uniform points on
    /// `[1e-4, 1]`.
    pub fn heatmap_grid_gammas(&self) -> Vec<f64> {
        if self.gammas.is_empty() {
            (0..20).map(|i| 1e-4 * 1e4f64.powf(i as f64 / 19.0)).collect()
        } else {
            self.gammas.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            bail!("synchronization interval tau must be at least 1");
        }
        if self.taus.is_empty() || self.taus.iter().any(|&t| t == 0) {
            bail!("tau list must be nonempty with every tau at least 1");
        }
        if self.rounds == 0 {
            bail!("round budget must be at least 1");
        }
        if self.replicates == 0 {
            bail!("replicate count must be at least 1");
        }
        if self.gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            bail!("step-size grid entries must be positive and finite");
        }
        self.schedule_kind()?;
        Ok(())
    }
}

/// Verification-suite selection and budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_suite")]
    pub suite: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_chains")]
    pub chains: u64,
    #[serde(default = "default_mc_seeds")]
    pub mc_seeds: u64,
    /// Iteration budgets for the decreasing-rate suite.
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<u64>,
    /// Index N of the non-monotonicity witness family (sine game only).
    #[serde(default = "default_witness")]
    pub witness_index: u32,
}

fn default_suite() -> String {
    "assumptions".into()
}
fn default_samples() -> usize {
    10_000
}
fn default_radius() -> f64 {
    10.0
}
fn default_chains() -> u64 {
    10_000
}
fn default_mc_seeds() -> u64 {
    1000
}
fn default_t_grid() -> Vec<u64> {
    vec![256, 512, 1024, 2048, 4096]
}
fn default_witness() -> u32 {
    10
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            suite: default_suite(),
            samples: default_samples(),
            radius: default_radius(),
            chains: default_chains(),
            mc_seeds: default_mc_seeds(),
            t_grid: default_t_grid(),
            witness_index: default_witness(),
        }
    }
}

/// The full, replayable description of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub verify: VerifySection,
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.run.validate()?;
        Ok(config)
    }
}

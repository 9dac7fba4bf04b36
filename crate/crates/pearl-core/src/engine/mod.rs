//! The synchronized local-SGD engine.
//!
//! A run alternates server synchronizations with per-player local phases: at
//! round `p` the server holds the joint action `x_{tau p}`; every player then
//! performs `tau` SGD steps on its own block against the *frozen* complement
//! `x_{tau p}^{-i}`, and the server collects the blocks into the next joint
//! action. With `tau = 1` the procedure is exactly simultaneous (stochastic)
//! gradient descent on the joint gradient operator.

pub mod schedule;
pub mod trajectory;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameProblem, JointAction, LayoutError};
use crate::linalg::{mean, sample_std};
use crate::params::{reference_equilibrium, AnalysisError};
use crate::rng::RngStream;

pub use schedule::{horizon_step_size, solve_eta, ScheduleError, ScheduleKind, StepSizeSchedule};
pub use trajectory::{csv_header, csv_string, write_csv, CsvRow, RoundRecord, RunStatus, Trajectory};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("round budget must be at least 1")]
    ZeroRounds,
    #[error("tau sweep needs at least one synchronization interval")]
    EmptyTauList,
    #[error("step-size grid must be nonempty and positive")]
    BadGammaGrid,
    #[error("every step size in the grid diverged")]
    AllGammasDiverged,
    #[error("replicate count must be at least 1")]
    ZeroReplicates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Deterministic,
    Stochastic,
}

/// Default ceiling on the relative error before a run is declared diverged.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tau: u64,
    pub rounds: u64,
    pub schedule: ScheduleKind,
    pub mode: Mode,
    pub seed: u64,
    /// Replicate coordinate of the RNG stream (varies across repeats).
    pub replicate: u64,
    pub divergence_threshold: f64,
    /// Early-stop target on the relative error; `None` runs the full budget.
    pub convergence_tol: Option<f64>,
    /// Run the per-player local phases on the thread pool. Results are
    /// bit-identical either way; this only trades latency for threads.
    pub parallel_players: bool,
}

impl RunConfig {
    pub fn new(tau: u64, rounds: u64, schedule: ScheduleKind, mode: Mode, seed: u64) -> Self {
        Self {
            tau,
            rounds,
            schedule,
            mode,
            seed,
            replicate: 0,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            convergence_tol: None,
            parallel_players: false,
        }
    }

    pub fn with_replicate(mut self, replicate: u64) -> Self {
        self.replicate = replicate;
        self
    }
}

/// Resolves the configured schedule, measuring problem constants only when
/// the rule needs them.
fn resolve_schedule(
    problem: &dyn GameProblem,
    kind: ScheduleKind,
    tau: u64,
) -> Result<StepSizeSchedule, EngineError> {
    let params = match kind {
        ScheduleKind::Constant { .. } => {
            // Constants resolve against placeholder moduli; gamma is fixed.
            crate::game::ProblemParameters::noiseless(1.0, 1.0, vec![1.0; problem.layout().n()])
                .expect("placeholder parameters")
        }
        _ => crate::params::compute_parameters(problem)?,
    };
    Ok(StepSizeSchedule::resolve(kind, &params, tau)?)
}

/// One full run of per-player local SGD.
///
/// Records a snapshot per synchronization (rounds `0..=R` on a completed
/// run). Deterministic mode is bit-reproducible from the config alone;
/// stochastic mode is bit-reproducible from `(config.seed, config.replicate)`.
/// A divergent iterate ends the run with [`RunStatus::Diverged`] and the
/// partial record preserved, not an error.
pub fn run_pearl_sgd(
    problem: &dyn GameProblem,
    x0: &JointAction,
    config: &RunConfig,
) -> Result<Trajectory, EngineError> {
    let layout = problem.layout();
    if x0.layout() != layout {
        return Err(EngineError::Layout(LayoutError::DimensionMismatch {
            got: x0.layout().total_dim(),
            expected: layout.total_dim(),
        }));
    }
    if config.rounds == 0 {
        return Err(EngineError::ZeroRounds);
    }
    let schedule = resolve_schedule(problem, config.schedule, config.tau)?;
    let (x_star, x_star_residual, _) = reference_equilibrium(problem)?;

    let start = Instant::now();
    let stream = RngStream::new(config.seed);
    let initial_sq_dist = x0.sq_dist(&x_star);
    let rel_error_of = |x: &JointAction| -> f64 {
        if initial_sq_dist == 0.0 {
            0.0
        } else {
            x.sq_dist(&x_star) / initial_sq_dist
        }
    };

    let n = layout.n();
    let total_dim = layout.total_dim();
    let mut records = Vec::with_capacity(config.rounds as usize + 1);
    let mut gammas = Vec::with_capacity(config.rounds as usize);
    let mut status = RunStatus::BudgetExhausted;
    let mut rounds_completed = 0;
    let mut x = x0.clone();

    for round in 0..=config.rounds {
        let rel_error = rel_error_of(&x);
        records.push(RoundRecord {
            round,
            iteration: config.tau * round,
            communications: round + 1,
            iterate: x.clone(),
            rel_error,
            objectives: (0..n).map(|i| problem.objective(i, &x)).collect(),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if !x.is_finite() || !rel_error.is_finite() || rel_error > config.divergence_threshold {
            status = RunStatus::Diverged;
            break;
        }
        if let Some(tol) = config.convergence_tol {
            if rel_error <= tol {
                status = RunStatus::Converged;
                break;
            }
        }
        if round == config.rounds {
            break;
        }

        let gamma = schedule.gamma(round);
        gammas.push(gamma);
        x = synchronize_round(problem, &x, round, gamma, config, &stream);
        rounds_completed += 1;
    }

    Ok(Trajectory {
        records,
        status,
        tau: config.tau,
        gammas,
        x_star,
        x_star_residual,
        initial_sq_dist,
        rounds_completed,
        exchange_volume_coords: rounds_completed * (total_dim as u64) * (n as u64 + 1),
    })
}

/// Local phases of one round followed by the collect step: each player runs
/// `tau` SGD steps on its own block with the other blocks frozen at the
/// round's synchronized joint action.
fn synchronize_round(
    problem: &dyn GameProblem,
    frozen: &JointAction,
    round: u64,
    gamma: f64,
    config: &RunConfig,
    stream: &RngStream,
) -> JointAction {
    let layout = problem.layout();
    let n = layout.n();
    let local_phase = |player: usize| -> Vec<f64> {
        let mut scratch = frozen.clone();
        for step in 0..config.tau {
            let iteration = config.tau * round + step;
            let g = match config.mode {
                Mode::Deterministic => problem.grad(player, &scratch),
                Mode::Stochastic => {
                    let mut rng = stream.draw(player, iteration, config.replicate);
                    problem.stoch_grad(player, &scratch, &mut rng).value
                }
            };
            let block = scratch.block_mut(player);
            for (b, gv) in block.iter_mut().zip(g.iter()) {
                *b -= gamma * gv;
            }
        }
        scratch.block(player).to_vec()
    };

    let blocks: Vec<Vec<f64>> = if config.parallel_players {
        (0..n).into_par_iter().map(local_phase).collect()
    } else {
        (0..n).map(local_phase).collect()
    };

    let mut next = frozen.clone();
    for (player, block) in blocks.iter().enumerate() {
        next.block_mut(player).copy_from_slice(block);
    }
    next
}

/// Aggregate curve of one sweep member: per-round mean and standard
/// deviation of the relative error across replicates, and per-round mean
/// objectives.
#[derive(Debug, Clone)]
pub struct TauSweepEntry {
    pub tau: u64,
    pub runs: Vec<Trajectory>,
    pub mean_rel_error: Vec<f64>,
    pub std_rel_error: Vec<f64>,
    pub mean_objectives: Vec<Vec<f64>>,
    /// Mean final relative error across replicates; infinite if any
    /// replicate diverged.
    pub final_error: f64,
}

impl TauSweepEntry {
    fn aggregate(tau: u64, runs: Vec<Trajectory>) -> Self {
        let max_rounds = runs.iter().map(|t| t.records.len()).max().unwrap_or(0);
        let n_players = runs
            .first()
            .map(|t| t.x_star.layout().n())
            .unwrap_or(0);
        let mut mean_rel_error = Vec::with_capacity(max_rounds);
        let mut std_rel_error = Vec::with_capacity(max_rounds);
        let mut mean_objectives = Vec::with_capacity(max_rounds);
        for r in 0..max_rounds {
            let errs: Vec<f64> =
                runs.iter().filter_map(|t| t.records.get(r)).map(|rec| rec.rel_error).collect();
            mean_rel_error.push(mean(&errs));
            std_rel_error.push(if errs.len() > 1 { sample_std(&errs) } else { 0.0 });
            let objs: Vec<f64> = (0..n_players)
                .map(|i| {
                    let vals: Vec<f64> = runs
                        .iter()
                        .filter_map(|t| t.records.get(r))
                        .map(|rec| rec.objectives[i])
                        .collect();
                    mean(&vals)
                })
                .collect();
            mean_objectives.push(objs);
        }
        let final_error = if runs.iter().any(|t| t.diverged()) {
            f64::INFINITY
        } else {
            let finals: Vec<f64> = runs.iter().map(|t| t.final_rel_error()).collect();
            mean(&finals)
        };
        Self { tau, runs, mean_rel_error, std_rel_error, mean_objectives, final_error }
    }

    pub fn diverged(&self) -> bool {
        self.final_error.is_infinite()
    }

    /// Rows of the aggregate curve in the standard CSV schema.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        (0..self.mean_rel_error.len())
            .map(|r| {
                let elapsed: Vec<f64> = self
                    .runs
                    .iter()
                    .filter_map(|t| t.records.get(r))
                    .map(|rec| rec.elapsed_ms)
                    .collect();
                CsvRow {
                    round: r as u64,
                    iteration: self.tau * r as u64,
                    communications: r as u64 + 1,
                    rel_error: self.mean_rel_error[r],
                    rel_error_std: self.std_rel_error[r],
                    objectives: self.mean_objectives[r].clone(),
                    elapsed_ms: mean(&elapsed),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rounds: u64,
    pub schedule: ScheduleKind,
    pub mode: Mode,
    pub seed: u64,
    pub replicates: u64,
    pub divergence_threshold: f64,
    pub parallel_players: bool,
}

impl SweepConfig {
    pub fn new(rounds: u64, schedule: ScheduleKind, mode: Mode, seed: u64, replicates: u64) -> Self {
        Self {
            rounds,
            schedule,
            mode,
            seed,
            replicates,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            parallel_players: false,
        }
    }

    fn run_config(&self, tau: u64, replicate: u64) -> RunConfig {
        RunConfig {
            tau,
            rounds: self.rounds,
            schedule: self.schedule,
            mode: self.mode,
            seed: self.seed,
            replicate,
            divergence_threshold: self.divergence_threshold,
            convergence_tol: None,
            parallel_players: self.parallel_players,
        }
    }
}

/// Runs one sweep member: `replicates` runs at the given `tau` (a single run
/// in deterministic mode, where replicates coincide), aggregated.
pub fn run_tau_entry(
    problem: &dyn GameProblem,
    x0: &JointAction,
    tau: u64,
    config: &SweepConfig,
) -> Result<TauSweepEntry, EngineError> {
    if config.replicates == 0 {
        return Err(EngineError::ZeroReplicates);
    }
    let replicates = match config.mode {
        Mode::Deterministic => 1,
        Mode::Stochastic => config.replicates,
    };
    let runs: Vec<Trajectory> = (0..replicates)
        .into_par_iter()
        .map(|r| run_pearl_sgd(problem, x0, &config.run_config(tau, r)))
        .collect::<Result<_, _>>()?;
    Ok(TauSweepEntry::aggregate(tau, runs))
}

/// Sweep over synchronization intervals. Each `tau` resolves its own
/// schedule; a diverged member is reported in place, never aborts the sweep.
pub fn sweep_tau(
    problem: &dyn GameProblem,
    x0: &JointAction,
    taus: &[u64],
    config: &SweepConfig,
) -> Result<Vec<TauSweepEntry>, EngineError> {
    if taus.is_empty() {
        return Err(EngineError::EmptyTauList);
    }
    taus.par_iter().map(|&tau| run_tau_entry(problem, x0, tau, config)).collect()
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best_gamma: f64,
    pub best_entry: TauSweepEntry,
    /// `(gamma, final mean relative error)` for every grid point, in grid
    /// order; diverged points carry infinity.
    pub grid: Vec<(f64, f64)>,
}

/// Tries every step size in `gamma_grid` at fixed `tau` and returns the one
/// with the smallest final mean relative error. Diverged step sizes rank
/// last; exact ties resolve toward the larger step size.
pub fn tune_gamma(
    problem: &dyn GameProblem,
    x0: &JointAction,
    tau: u64,
    gamma_grid: &[f64],
    config: &SweepConfig,
) -> Result<TuneResult, EngineError> {
    if gamma_grid.is_empty() || gamma_grid.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(EngineError::BadGammaGrid);
    }
    let entries: Vec<TauSweepEntry> = gamma_grid
        .par_iter()
        .map(|&gamma| {
            let mut member = config.clone();
            member.schedule = ScheduleKind::Constant { gamma };
            run_tau_entry(problem, x0, tau, &member)
        })
        .collect::<Result<_, _>>()?;

    let grid: Vec<(f64, f64)> =
        gamma_grid.iter().copied().zip(entries.iter().map(|e| e.final_error)).collect();
    let mut best: Option<usize> = None;
    for (idx, &(gamma, err)) in grid.iter().enumerate() {
        if err.is_infinite() {
            continue;
        }
        best = match best {
            None => Some(idx),
            Some(b) => {
                let (bg, be) = grid[b];
                if err < be || (err == be && gamma > bg) {
                    Some(idx)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best_idx = best.ok_or(EngineError::AllGammasDiverged)?;
    Ok(TuneResult {
        best_gamma: grid[best_idx].0,
        best_entry: entries.into_iter().nth(best_idx).expect("index from enumerate"),
        grid,
    })
}

#[derive(Debug, Clone)]
pub struct HeatmapResult {
    pub gammas: Vec<f64>,
    pub taus: Vec<u64>,
    /// `log10` of the final relative error, `entries[gamma_idx][tau_idx]`;
    /// diverged cells hold `+inf`.
    pub entries: Vec<Vec<f64>>,
}

impl HeatmapResult {
    /// Step size with the smallest final error for each `tau` column, when
    /// any cell of the column is finite.
    pub fn argmin_gamma_per_tau(&self) -> Vec<Option<f64>> {
        (0..self.taus.len())
            .map(|t| {
                let mut best: Option<(f64, f64)> = None;
                for (gi, &gamma) in self.gammas.iter().enumerate() {
                    let value = self.entries[gi][t];
                    if value.is_finite() {
                        best = match best {
                            None => Some((gamma, value)),
                            Some((bg, bv)) => {
                                if value < bv || (value == bv && gamma > bg) {
                                    Some((gamma, value))
                                } else {
                                    Some((bg, bv))
                                }
                            }
                        };
                    }
                }
                best.map(|(g, _)| g)
            })
            .collect()
    }
}

/// Final relative errors (log10) over a `gamma x tau` grid after a fixed
/// round budget.
pub fn heatmap_grid(
    problem: &dyn GameProblem,
    x0: &JointAction,
    gammas: &[f64],
    taus: &[u64],
    config: &SweepConfig,
) -> Result<HeatmapResult, EngineError> {
    if gammas.is_empty() || gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(EngineError::BadGammaGrid);
    }
    if taus.is_empty() {
        return Err(EngineError::EmptyTauList);
    }
    let cells: Vec<((usize, usize), f64)> = gammas
        .par_iter()
        .enumerate()
        .flat_map(|(gi, &gamma)| {
            taus.par_iter().enumerate().map(move |(ti, &tau)| ((gi, ti), (gamma, tau)))
        })
        .map(|((gi, ti), (gamma, tau))| {
            let mut member = config.clone();
            member.schedule = ScheduleKind::Constant { gamma };
            let entry = run_tau_entry(problem, x0, tau, &member)?;
            let value =
                if entry.diverged() { f64::INFINITY } else { entry.final_error.log10() };
            Ok(((gi, ti), value))
        })
        .collect::<Result<_, EngineError>>()?;

    let mut entries = vec![vec![f64::NAN; taus.len()]; gammas.len()];
    for ((gi, ti), value) in cells {
        entries[gi][ti] = value;
    }
    Ok(HeatmapResult { gammas: gammas.to_vec(), taus: taus.to_vec(), entries })
}

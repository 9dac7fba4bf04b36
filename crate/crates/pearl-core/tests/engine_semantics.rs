//! Behavioral contracts of the synchronization engine: frozen complements
//! within a round, tau = 1 equivalence with plain simultaneous SGD,
//! sequential/parallel equivalence, communication accounting, and the
//! divergence path.

use std::sync::Mutex;

use nalgebra::DVector;
use pearl_core::engine::{
    heatmap_grid, run_pearl_sgd, run_tau_entry, sweep_tau, tune_gamma, EngineError, Mode,
    RunConfig, RunStatus, ScheduleKind, SweepConfig,
};
use pearl_core::game::{BlockLayout, GameProblem, GradientSample, JointAction};
use pearl_core::problems::minimax::QuadraticMinimaxGame;
use pearl_core::rng::{DrawRng, RngStream};

fn scalar_game() -> QuadraticMinimaxGame {
    QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0)
}

fn ones(problem: &dyn GameProblem) -> JointAction {
    JointAction::ones(problem.layout().clone())
}

#[test]
fn starting_at_equilibrium_stays_there() {
    let game = scalar_game();
    let x0 = game.equilibrium().unwrap();
    let config = RunConfig::new(3, 20, ScheduleKind::Theoretical, Mode::Deterministic, 1);
    let traj = run_pearl_sgd(&game, &x0, &config).unwrap();
    assert_eq!(traj.status, RunStatus::BudgetExhausted);
    assert_eq!(traj.records.len(), 21);
    for r in &traj.records {
        assert_eq!(r.iterate, x0, "round {} moved off the equilibrium", r.round);
        assert_eq!(r.rel_error, 0.0);
    }
}

/// Probe wrapping a game and recording the complement every gradient call
/// sees, per (round, player).
struct ComplementProbe<'a> {
    inner: &'a QuadraticMinimaxGame,
    tau: u64,
    seen: Mutex<Vec<(u64, usize, Vec<f64>)>>,
}

impl GameProblem for ComplementProbe<'_> {
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
        let sample = self.inner.stoch_grad(player, x, rng);
        // Iteration index is recoverable from the number of calls per player;
        // store the complement and bucket by call order below.
        self.seen.lock().unwrap().push((self.tau, player, x.complement(player)));
        sample
    }

    fn equilibrium(&self) -> Option<JointAction> {
        self.inner.equilibrium()
    }

    fn affine_form(&self) -> Option<(nalgebra::DMatrix<f64>, DVector<f64>)> {
        self.inner.affine_form()
    }
}

#[test]
fn complement_is_frozen_within_each_round() {
    let game = QuadraticMinimaxGame::generate(
        3,
        4,
        pearl_core::problems::minimax::MinimaxSpectrum::default(),
        5,
    )
    .unwrap();
    let tau = 4;
    let probe = ComplementProbe { inner: &game, tau, seen: Mutex::new(Vec::new()) };
    let x0 = ones(&game);
    let config = RunConfig::new(tau, 6, ScheduleKind::Theoretical, Mode::Stochastic, 3);
    let traj = run_pearl_sgd(&probe, &x0, &config).unwrap();

    let seen = probe.seen.into_inner().unwrap();
    // Calls appear in execution order: per round, per player, tau calls.
    assert_eq!(seen.len(), 6 * 2 * tau as usize);
    let mut idx = 0;
    for round in 0..6u64 {
        let frozen = &traj.records[round as usize].iterate;
        for player in 0..2 {
            for _step in 0..tau {
                let (_, seen_player, complement) = &seen[idx];
                assert_eq!(*seen_player, player);
                assert_eq!(
                    complement,
                    &frozen.complement(player),
                    "round {round} player {player}: complement drifted mid-round"
                );
                idx += 1;
            }
        }
    }
}

#[test]
fn tau_one_matches_reference_simultaneous_sgd() {
    let game = QuadraticMinimaxGame::generate(
        4,
        7,
        pearl_core::problems::minimax::MinimaxSpectrum::default(),
        9,
    )
    .unwrap();
    let x0 = ones(&game);
    let gamma = 0.002;
    let steps = 500u64;
    let config = RunConfig::new(1, steps, ScheduleKind::Constant { gamma }, Mode::Stochastic, 42);
    let traj = run_pearl_sgd(&game, &x0, &config).unwrap();

    // Reference loop: x_{k+1}^i = x_k^i - gamma * g_k^i with the same draws.
    let stream = RngStream::new(42);
    let layout = game.layout().clone();
    let mut x = x0.clone();
    for k in 0..steps {
        let grads: Vec<DVector<f64>> = (0..layout.n())
            .map(|i| {
                let mut rng = stream.draw(i, k, 0);
                game.stoch_grad(i, &x, &mut rng).value
            })
            .collect();
        for (i, g) in grads.iter().enumerate() {
            for (b, gv) in x.block_mut(i).iter_mut().zip(g.iter()) {
                *b -= gamma * gv;
            }
        }
        assert_eq!(
            traj.records[k as usize + 1].iterate.as_slice(),
            x.as_slice(),
            "iterates split from the reference at step {k}"
        );
    }
}

#[test]
fn parallel_players_bit_identical_to_sequential() {
    let game = QuadraticMinimaxGame::generate(
        6,
        10,
        pearl_core::problems::minimax::MinimaxSpectrum::default(),
        13,
    )
    .unwrap();
    let x0 = ones(&game);
    let mut config = RunConfig::new(5, 30, ScheduleKind::Theoretical, Mode::Stochastic, 7);
    let sequential = run_pearl_sgd(&game, &x0, &config).unwrap();
    config.parallel_players = true;
    let parallel = run_pearl_sgd(&game, &x0, &config).unwrap();
    for (a, b) in sequential.records.iter().zip(&parallel.records) {
        assert_eq!(a.iterate.as_slice(), b.iterate.as_slice());
    }
}

#[test]
fn stochastic_runs_reproduce_bit_for_bit() {
    let game = scalar_game();
    let noisy = pearl_core::problems::noise::AdditiveGaussianNoise::new(game, 0.7);
    let x0 = ones(&noisy);
    let config = RunConfig::new(3, 40, ScheduleKind::Constant { gamma: 0.05 }, Mode::Stochastic, 21);
    let a = run_pearl_sgd(&noisy, &x0, &config).unwrap();
    let b = run_pearl_sgd(&noisy, &x0, &config).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.iterate.as_slice(), rb.iterate.as_slice());
        assert_eq!(ra.rel_error, rb.rel_error);
    }
    // A different replicate coordinate gives a different path.
    let c = run_pearl_sgd(&noisy, &x0, &config.clone().with_replicate(1)).unwrap();
    assert_ne!(
        a.records.last().unwrap().iterate.as_slice(),
        c.records.last().unwrap().iterate.as_slice()
    );
}

#[test]
fn communication_accounting() {
    let game = scalar_game();
    let x0 = ones(&game);
    let rounds = 17;
    let config = RunConfig::new(4, rounds, ScheduleKind::Theoretical, Mode::Deterministic, 0);
    let traj = run_pearl_sgd(&game, &x0, &config).unwrap();
    assert_eq!(traj.records.len() as u64, rounds + 1);
    for (p, r) in traj.records.iter().enumerate() {
        assert_eq!(r.communications, p as u64 + 1);
        assert_eq!(r.iteration, 4 * p as u64);
    }
    // D uplink + n * D downlink per completed round, D = 2, n = 2.
    assert_eq!(traj.exchange_volume_coords, rounds * 2 * 3);
    assert_eq!(traj.rounds_completed, rounds);
}

#[test]
fn divergence_preserves_partial_record() {
    // mu < 1 with tau large and an unscaled step size: player drift blows up.
    let game = QuadraticMinimaxGame::scalar(0.5, 1.0, 0.5);
    let x0 = ones(&game);
    let config = RunConfig::new(
        50,
        100,
        ScheduleKind::Constant { gamma: 0.5 },
        Mode::Deterministic,
        1,
    );
    let traj = run_pearl_sgd(&game, &x0, &config).unwrap();
    assert_eq!(traj.status, RunStatus::Diverged);
    assert!(traj.records.len() < 101);
    assert!(traj.records.len() >= 2);
    let last = traj.records.last().unwrap();
    assert!(!last.rel_error.is_finite() || last.rel_error > 1e12);
    // Earlier records are intact and start at relative error 1.
    assert_eq!(traj.records[0].rel_error, 1.0);
}

#[test]
fn convergence_status_with_tolerance() {
    let game = scalar_game();
    let x0 = ones(&game);
    let mut config = RunConfig::new(1, 500, ScheduleKind::Theoretical, Mode::Deterministic, 0);
    config.convergence_tol = Some(1e-6);
    let traj = run_pearl_sgd(&game, &x0, &config).unwrap();
    assert_eq!(traj.status, RunStatus::Converged);
    assert!(traj.final_rel_error() <= 1e-6);
    assert!((traj.records.len() as u64) < 501);
}

#[test]
fn sweep_over_single_tau_equals_direct_run() {
    let game = scalar_game();
    let x0 = ones(&game);
    let sweep = SweepConfig::new(25, ScheduleKind::Theoretical, Mode::Stochastic, 3, 2);
    let entries = sweep_tau(&game, &x0, &[4], &sweep).unwrap();
    assert_eq!(entries.len(), 1);
    let direct = run_tau_entry(&game, &x0, 4, &sweep).unwrap();
    assert_eq!(entries[0].mean_rel_error, direct.mean_rel_error);
    assert_eq!(entries[0].final_error, direct.final_error);
}

#[test]
fn tune_prefers_stable_gamma_and_breaks_ties_up() {
    let game = QuadraticMinimaxGame::scalar(0.5, 1.0, 0.5);
    let x0 = ones(&game);
    let sweep = SweepConfig::new(60, ScheduleKind::Theoretical, Mode::Deterministic, 3, 1);
    // 0.5 diverges under tau = 50 player drift; 0.001 is stable.
    let result = tune_gamma(&game, &x0, 50, &[0.5, 0.001], &sweep).unwrap();
    assert_eq!(result.best_gamma, 0.001);
    assert!(result.grid[0].1.is_infinite());

    // Duplicated grid point: the tie resolves without ambiguity.
    let dup = tune_gamma(&game, &x0, 2, &[0.01, 0.01], &sweep).unwrap();
    assert_eq!(dup.best_gamma, 0.01);

    // Every point diverging is an explicit error.
    let err = tune_gamma(&game, &x0, 50, &[0.5, 0.9], &sweep).unwrap_err();
    assert!(matches!(err, EngineError::AllGammasDiverged));
}

#[test]
fn tuned_step_sizes_favor_moderate_local_phases() {
    // With the coupling weak relative to the players' own curvature, local
    // phases act like inner best-response solves: tuning gamma over the
    // decade grid at tau = 5 beats tau = 1 at equal communication rounds.
    let spectrum = pearl_core::problems::minimax::MinimaxSpectrum {
        mu_a: 1.0,
        l_a: 2.0,
        l_b: 0.5,
        mu_c: 1.0,
        l_c: 2.0,
    };
    let game = QuadraticMinimaxGame::generate(10, 100, spectrum, 7).unwrap();
    let x0 = ones(&game);
    let grid: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
    let sweep = SweepConfig::new(100, ScheduleKind::Theoretical, Mode::Deterministic, 7, 1);
    let tau1 = tune_gamma(&game, &x0, 1, &grid, &sweep).unwrap();
    let tau5 = tune_gamma(&game, &x0, 5, &grid, &sweep).unwrap();
    assert!(
        tau5.best_entry.final_error <= tau1.best_entry.final_error,
        "tau=5 tuned {:.3e} vs tau=1 tuned {:.3e}",
        tau5.best_entry.final_error,
        tau1.best_entry.final_error
    );
}

#[test]
fn robot_sweep_errors_decrease_with_tau() {
    let game = pearl_core::problems::robot::RobotControlGame::benchmark();
    let x0 = ones(&game);
    let sweep = SweepConfig::new(200, ScheduleKind::TheoreticalRobot, Mode::Stochastic, 7, 5);
    let entries = sweep_tau(&game, &x0, &[1, 2, 4, 5, 8, 20], &sweep).unwrap();
    for pair in entries.windows(2) {
        assert!(
            pair[1].final_error <= pair[0].final_error,
            "tau={} error {:.3e} above tau={} error {:.3e}",
            pair[1].tau,
            pair[1].final_error,
            pair[0].tau,
            pair[0].final_error
        );
    }
}

#[test]
fn heatmap_single_cell_matches_direct_run_and_infinite_rows_mark_divergence() {
    let game = QuadraticMinimaxGame::scalar(0.5, 1.0, 0.5);
    let x0 = ones(&game);
    let sweep = SweepConfig::new(40, ScheduleKind::Theoretical, Mode::Deterministic, 3, 1);

    let single = heatmap_grid(&game, &x0, &[0.01], &[2], &sweep).unwrap();
    let mut config = RunConfig::new(2, 40, ScheduleKind::Constant { gamma: 0.01 }, Mode::Deterministic, 3);
    config.parallel_players = false;
    let direct = run_pearl_sgd(&game, &x0, &config).unwrap();
    assert_eq!(single.entries[0][0], direct.final_rel_error().log10());

    // A step size far beyond stability diverges for every tau.
    let grid = heatmap_grid(&game, &x0, &[5.0, 0.01], &[1, 2, 4], &sweep).unwrap();
    assert!(grid.entries[0].iter().all(|v| v.is_infinite()));
    assert!(grid.entries[1].iter().all(|v| v.is_finite()));
    let argmins = grid.argmin_gamma_per_tau();
    assert!(argmins.iter().all(|g| *g == Some(0.01)));
}

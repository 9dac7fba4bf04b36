//! Acceptance suite: every release criterion as one test with a printed
//! PASS line (run with `--nocapture` to see them). The criteria pin the
//! benchmark instances, budgets, and tolerances; numbers here are frozen.

use std::time::Instant;

use nalgebra::DVector;
use pearl_core::engine::{
    heatmap_grid, run_pearl_sgd, run_tau_entry, solve_eta, sweep_tau, Mode, RunConfig, RunStatus,
    ScheduleKind, ScheduleError, StepSizeSchedule, SweepConfig,
};
use pearl_core::game::{joint_gradient, GameProblem, JointAction};
use pearl_core::params::{compute_parameters, estimate_sigma};
use pearl_core::problems::minimax::{MinimaxSpectrum, QuadraticMinimaxGame};
use pearl_core::problems::noise::AdditiveGaussianNoise;
use pearl_core::problems::nplayer::{NPlayerQuadraticGame, NPlayerSpectrum};
use pearl_core::problems::robot::RobotControlGame;
use pearl_core::problems::sine::SineNonCocoerciveGame;
use pearl_core::rng::RngStream;
use pearl_core::verify::{
    check_assumptions, check_contraction, check_decreasing_rate, check_gradnorm_drift,
    check_local_error, check_neighborhood, AssumptionTols,
};

const TAUS: [u64; 6] = [1, 2, 4, 5, 8, 20];

/// The frozen benchmark minimax instance: d = 10, M = 100, eigenvalues of
/// A/C in [1, 2], coupling bound 15, generator seed 7.
fn benchmark_minimax() -> QuadraticMinimaxGame {
    QuadraticMinimaxGame::generate(10, 100, MinimaxSpectrum::default(), 7).unwrap()
}

/// The 2-d strongly monotone quadratic with exactly known noise:
/// the scalar saddle u^2/2 + uv - v^2/2 plus unit Gaussian gradient noise,
/// so mu = 1, ell = 2, sigma^2 = 2.
fn noisy_2d_game() -> AdditiveGaussianNoise<QuadraticMinimaxGame> {
    AdditiveGaussianNoise::new(QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0), 1.0)
}

fn ones(problem: &dyn GameProblem) -> JointAction {
    JointAction::ones(problem.layout().clone())
}

#[test]
fn criterion_01_deterministic_contraction_per_round() {
    let start = Instant::now();
    let game = benchmark_minimax();
    let params = compute_parameters(&game).unwrap();
    let x0 = ones(&game);
    for &tau in &TAUS {
        let gamma = StepSizeSchedule::theoretical_gamma_cap(&params, tau);
        let config = RunConfig::new(
            tau,
            100,
            ScheduleKind::Constant { gamma },
            Mode::Deterministic,
            7,
        );
        let trajectory = run_pearl_sgd(&game, &x0, &config).unwrap();
        assert_eq!(trajectory.status, RunStatus::BudgetExhausted);
        let report = check_contraction(&trajectory, &params, gamma, tau, 1e-9);
        assert!(
            report.passed(),
            "tau = {tau}: contraction bound violated: {}",
            report.summary_line()
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 1 runtime {elapsed:.2}s exceeds 10s");
    println!("ACCEPT 01 PASS: per-round contraction holds for all tau over 100 rounds ({elapsed:.2}s)");
}

#[test]
fn criterion_02_deterministic_curves_within_one_decade() {
    let game = benchmark_minimax();
    let x0 = ones(&game);
    let sweep = SweepConfig::new(100, ScheduleKind::Theoretical, Mode::Deterministic, 7, 1);
    let entries = sweep_tau(&game, &x0, &TAUS, &sweep).unwrap();
    let finals: Vec<f64> = entries.iter().map(|e| e.final_error.log10()).collect();
    let spread = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - finals.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        spread <= 1.0,
        "final log10 errors spread over {spread:.3} decades: {finals:?}"
    );
    println!(
        "ACCEPT 02 PASS: six theoretical-step curves end within {spread:.3} decades of each other"
    );
}

#[test]
fn criterion_03_stochastic_larger_tau_reaches_lower_error() {
    let start = Instant::now();
    let game = benchmark_minimax();
    let x0 = ones(&game);
    // Equal communication-round budget for every tau, long enough for both
    // noise floors to be reached.
    let sweep = SweepConfig::new(400, ScheduleKind::Theoretical, Mode::Stochastic, 7, 5);
    let e1 = run_tau_entry(&game, &x0, 1, &sweep).unwrap();
    let e20 = run_tau_entry(&game, &x0, 20, &sweep).unwrap();
    assert!(
        e20.final_error < e1.final_error,
        "mean final error: tau=20 {:.3e} vs tau=1 {:.3e}",
        e20.final_error,
        e1.final_error
    );
    let wins = (0..5)
        .filter(|&r| e20.runs[r].final_rel_error() < e1.runs[r].final_rel_error())
        .count();
    assert!(wins >= 4, "tau=20 beat tau=1 on only {wins}/5 seeds");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 3 runtime {elapsed:.2}s exceeds 60s");
    println!(
        "ACCEPT 03 PASS: tau=20 mean error {:.3e} < tau=1 {:.3e}, {wins}/5 seeds ({elapsed:.2}s)",
        e20.final_error, e1.final_error
    );
}

#[test]
fn criterion_04_tau_one_bit_identical_to_sgda() {
    let game = benchmark_minimax();
    let x0 = ones(&game);
    let gamma = 0.005;
    let steps = 10_000u64;
    let seed = 42;
    let config =
        RunConfig::new(1, steps, ScheduleKind::Constant { gamma }, Mode::Stochastic, seed);
    let trajectory = run_pearl_sgd(&game, &x0, &config).unwrap();
    assert_eq!(trajectory.records.len() as u64, steps + 1);

    // Independent reference loop: x_{k+1} = x_k - gamma F_xi(x_k), sharing
    // the per-(player, iteration) substreams.
    let stream = RngStream::new(seed);
    let n = game.layout().n();
    let mut x = x0.clone();
    for k in 0..steps {
        let draws: Vec<DVector<f64>> = (0..n)
            .map(|i| {
                let mut rng = stream.draw(i, k, 0);
                game.stoch_grad(i, &x, &mut rng).value
            })
            .collect();
        for (i, g) in draws.iter().enumerate() {
            for (b, gv) in x.block_mut(i).iter_mut().zip(g.iter()) {
                *b -= gamma * gv;
            }
        }
        assert_eq!(
            trajectory.records[k as usize + 1].iterate.as_slice(),
            x.as_slice(),
            "iterate differs from the reference at step {k}"
        );
    }
    println!("ACCEPT 04 PASS: tau=1 runs bit-identical to the reference loop for 10^4 steps");
}

#[test]
fn criterion_05_constant_step_neighborhood_bound() {
    let start = Instant::now();
    let game = noisy_2d_game();
    let params = compute_parameters(&game).unwrap();
    assert_eq!(params.sigma_sq_total, 2.0);
    let x0 = ones(&game);
    let tau = 4;
    let gamma = StepSizeSchedule::theoretical_gamma_cap(&params, tau);
    let report = check_neighborhood(&game, &x0, &params, gamma, tau, 50, 1000, 5);
    assert!(report.passed(), "{}", report.summary_line());
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "criterion 5 runtime {elapsed:.2}s exceeds 120s");
    println!(
        "ACCEPT 05 PASS: Monte Carlo mean within the neighborhood bound ({}; {elapsed:.2}s)",
        report.detail.as_deref().unwrap_or("")
    );
}

#[test]
fn criterion_06_horizon_solver_fixed_point_and_precondition() {
    // eta log eta = T / (2 (1 + 2q)) with T = 4e, q = 1/2 solves to eta = e.
    let e = std::f64::consts::E;
    let eta = solve_eta(4.0 * e, 0.5).unwrap();
    assert!((eta - e).abs() <= 1e-10 * e, "eta = {eta:.15}, expected e");

    // A budget whose solution falls at or below kappa tau must be rejected
    // with the minimum admissible budget named.
    let params =
        pearl_core::game::ProblemParameters::new(0.01, 10.0, vec![1.0, 1.0], vec![0.0, 0.0])
            .unwrap(); // kappa = 1000
    match pearl_core::engine::horizon_step_size(100.0, &params, 4) {
        Err(ScheduleError::HorizonTooShort { min_total_iters, kappa_tau, .. }) => {
            assert_eq!(kappa_tau, 4000.0);
            assert!(min_total_iters > 100.0);
        }
        other => panic!("expected the precondition error, got {other:?}"),
    }
    println!("ACCEPT 06 PASS: eta solver returns e at the closed-form fixed point; short budgets error");
}

#[test]
fn criterion_07_decreasing_schedule_and_rate() {
    let game = noisy_2d_game();
    let params = compute_parameters(&game).unwrap();
    let x0 = ones(&game);
    let tau = 4;
    let t_grid = [256u64, 512, 1024, 2048, 4096];
    let check = check_decreasing_rate(&game, &x0, &params, tau, &t_grid, 200, 11);
    for report in &check.reports {
        assert!(report.passed(), "{}", report.summary_line());
    }
    // The pinned doubling pair: T = 2^11 -> 2^12.
    let at = |t: u64| {
        check
            .estimates
            .iter()
            .find(|e| e.total_iters == t)
            .map(|e| e.mean_sq_dist)
            .expect("grid point present")
    };
    let ratio = at(4096) / at(2048);
    assert!(ratio <= 0.75, "mean error ratio 2^12/2^11 = {ratio:.3} exceeds 0.75");
    println!(
        "ACCEPT 07 PASS: schedule switch exact, four-term bound holds on 2^8..2^12, \
         doubling ratio {ratio:.3} <= 0.75"
    );
}

#[test]
fn criterion_08_heatmap_hyperbola() {
    let game = benchmark_minimax();
    let x0 = ones(&game);
    // 20 log-uniform step sizes on [1e-4, 1].
    let gammas: Vec<f64> = (0..20).map(|i| 1e-4 * 1e4f64.powf(i as f64 / 19.0)).collect();
    let sweep = SweepConfig::new(100, ScheduleKind::Theoretical, Mode::Deterministic, 7, 1);
    let result = heatmap_grid(&game, &x0, &gammas, &TAUS, &sweep).unwrap();
    let argmins = result.argmin_gamma_per_tau();
    let products: Vec<f64> = argmins
        .iter()
        .zip(&TAUS)
        .map(|(g, &t)| g.expect("every tau column has a stable cell") * t as f64)
        .collect();
    let max = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = products.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        max / min <= 3.0,
        "argmin gamma * tau products vary by {:.3}x: {products:?}",
        max / min
    );
    println!(
        "ACCEPT 08 PASS: argmin step-size products vary by {:.3}x <= 3x across tau",
        max / min
    );
}

#[test]
fn criterion_09_assumption_suite() {
    // Sine game, mu = 1, ell = 4: sampled star conditions at 10^4 points.
    let sine = SineNonCocoerciveGame::new(1.0, 4.0).unwrap();
    let params = compute_parameters(&sine).unwrap();
    let reports = check_assumptions(&sine, &params, 10_000, 10.0, 11, AssumptionTols::default());
    for name in ["qsm", "sco"] {
        let report = reports.iter().find(|r| r.name == name).unwrap();
        assert!(report.passed(), "{}", report.summary_line());
    }

    // Non-monotonicity witness at N = 10 (u = v = 20.5 pi): the certificate
    // value 4 ell^2 - 4 (ell - mu)^2 (20.5 pi)^2, computed independently.
    let t = 20.5 * std::f64::consts::PI;
    let expected = 4.0 * 16.0 - 4.0 * 9.0 * t * t;
    let witness = sine.witness_value(10);
    assert_eq!(witness, expected);
    assert!(witness < 0.0, "witness value {witness} not negative");
    // And the exact Jacobian exhibits non-monotonicity at the quarter-phase
    // point of the same family.
    let (u, v) = sine.exact_witness_point(10);
    assert!(sine.jacobian_symmetrized_det(u, v) < 0.0);

    // n-player skew game: strong monotonicity with the certified modulus on
    // 10^3 random pairs.
    let nplayer = NPlayerQuadraticGame::generate(5, 10, 100, NPlayerSpectrum::default(), 7).unwrap();
    let mu = nplayer.mu_certificate();
    assert_eq!(mu, 1.0);
    let layout = nplayer.layout().clone();
    let stream = RngStream::new(3);
    for pair in 0..1000u64 {
        let mut rng = stream.labeled(pair);
        let draw = |rng: &mut pearl_core::rng::DrawRng| {
            use rand::Rng;
            JointAction::new(
                layout.clone(),
                DVector::from_fn(layout.total_dim(), |_, _| 20.0 * rng.random::<f64>() - 10.0),
            )
            .unwrap()
        };
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let fx = joint_gradient(&nplayer, &x).unwrap();
        let fy = joint_gradient(&nplayer, &y).unwrap();
        let diff = x.values() - y.values();
        let inner = (fx - fy).dot(&diff);
        assert!(
            inner >= mu * diff.norm_squared() - 1e-9,
            "pair {pair}: {inner} < mu ||x - y||^2"
        );
    }
    println!(
        "ACCEPT 09 PASS: sine QSM/SCO at 10^4 samples, witness {witness:.3e} < 0, \
         skew game monotone with mu = {mu}"
    );
}

#[test]
fn criterion_10_robot_benchmark() {
    let start = Instant::now();
    let game = RobotControlGame::benchmark();

    // Equilibrium residual from the linear solve.
    let (x_star, residual) = pearl_core::params::solve_affine_equilibrium(&game).unwrap();
    assert!(residual <= 1e-10, "residual {residual}");
    assert!(joint_gradient(&game, &x_star).unwrap().norm() <= 1e-10);

    // Stochastic runs at tau = 5 for 200 rounds, 5 seeds, reduced-margin
    // theoretical step size.
    let x0 = ones(&game);
    let sweep = SweepConfig::new(200, ScheduleKind::TheoreticalRobot, Mode::Stochastic, 7, 5);
    let entry = run_tau_entry(&game, &x0, 5, &sweep).unwrap();
    assert!(
        entry.final_error < 0.1,
        "mean relative error after 200 rounds = {:.3e}",
        entry.final_error
    );

    // Per-player objective columns are part of the exported curve.
    let rows = entry.csv_rows();
    let csv = pearl_core::engine::csv_string(5, &rows);
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "round,iteration,communications,rel_error,rel_error_std,f_1,f_2,f_3,f_4,f_5,elapsed_ms"
    );
    assert_eq!(csv.lines().count(), 202);

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "criterion 10 runtime {elapsed:.2}s exceeds 30s");
    println!(
        "ACCEPT 10 PASS: residual {residual:.2e}, mean error {:.3e} < 0.1, f_i CSV emitted ({elapsed:.2}s)",
        entry.final_error
    );
}

#[test]
fn criterion_11_local_lemma_suites() {
    let game = benchmark_minimax();
    let params = compute_parameters(&game)
        .unwrap()
        .with_sigma(estimate_sigma(&game, 50, 2000, 3))
        .unwrap();
    let x0 = ones(&game);
    let tau = 8;
    let chains = 10_000;
    for player in 0..2 {
        let l_i = params.l_per_player[player];
        let gamma = 1.0 / (l_i * (tau - 1) as f64);
        let drift = check_gradnorm_drift(&game, player, &x0, &params, gamma, tau, chains, 13);
        assert!(drift.passed(), "player {player}: {}", drift.summary_line());
        let local = check_local_error(&game, player, &x0, &params, gamma, tau, chains, 17);
        assert!(local.passed(), "player {player}: {}", local.summary_line());
    }
    println!("ACCEPT 11 PASS: gradient-drift and local-error bounds hold at 10^4 chains, tau = 8");
}

#[test]
fn criterion_12_player_drift_demonstration() {
    // L(u, v) = (mu/2) u^2 + uv - (mu/2) v^2 with mu = 0.5: local phases pull
    // the players toward moving targets; an unscaled step size diverges.
    let game = QuadraticMinimaxGame::scalar(0.5, 1.0, 0.5);
    let x0 = ones(&game);
    let unscaled = RunConfig::new(
        50,
        100,
        ScheduleKind::Constant { gamma: 0.5 },
        Mode::Deterministic,
        1,
    );
    let diverged = run_pearl_sgd(&game, &x0, &unscaled).unwrap();
    assert_eq!(diverged.status, RunStatus::Diverged);

    let scaled = RunConfig::new(50, 100, ScheduleKind::Theoretical, Mode::Deterministic, 1);
    let converged = run_pearl_sgd(&game, &x0, &scaled).unwrap();
    assert_eq!(converged.status, RunStatus::BudgetExhausted);
    assert!(
        converged.final_rel_error() < 1e-6,
        "theoretical step size should converge, got {:.3e}",
        converged.final_rel_error()
    );
    println!(
        "ACCEPT 12 PASS: unscaled gamma diverges at round {}, tau-scaled gamma reaches {:.3e}",
        diverged.rounds_completed,
        converged.final_rel_error()
    );
}

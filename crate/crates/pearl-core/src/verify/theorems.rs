//! Checks of the convergence guarantees: per-round deterministic contraction,
//! the stochastic neighborhood bound under a constant step size, and the
//! four-term bound of the decreasing schedule.

use rayon::prelude::*;

use crate::engine::{run_pearl_sgd, Mode, RunConfig, ScheduleKind, StepSizeSchedule, Trajectory};
use crate::game::{GameProblem, JointAction, ProblemParameters};
use crate::linalg::{ci_half_width, mean};
use crate::verify::BoundReport;

/// `zeta = 2 - gamma ell tau - 2 (tau - 1) gamma L_max sqrt(kappa / 3)`.
pub fn zeta(params: &ProblemParameters, gamma: f64, tau: u64) -> f64 {
    let tau_f = tau as f64;
    2.0 - gamma * params.ell * tau_f
        - 2.0 * (tau_f - 1.0) * gamma * params.l_max * (params.kappa / 3.0).sqrt()
}

/// Per-round contraction factor `1 - gamma tau mu zeta`.
pub fn contraction_rate(params: &ProblemParameters, gamma: f64, tau: u64) -> f64 {
    1.0 - gamma * tau as f64 * params.mu * zeta(params, gamma, tau)
}

/// Constant-step neighborhood bound after `rounds` rounds:
/// `(1 - gamma tau mu zeta)^R D0 + (1 + (tau-1)((4 + sqrt(3) q) gamma tau L_max + q / (2 tau))) gamma sigma^2 / (mu zeta)`.
pub fn neighborhood_bound(
    params: &ProblemParameters,
    gamma: f64,
    tau: u64,
    rounds: u64,
    initial_sq_dist: f64,
) -> f64 {
    let tau_f = tau as f64;
    let z = zeta(params, gamma, tau);
    let rate = contraction_rate(params, gamma, tau);
    let noise_factor = 1.0
        + (tau_f - 1.0)
            * ((4.0 + 3.0_f64.sqrt() * params.q) * gamma * tau_f * params.l_max
                + params.q / (2.0 * tau_f));
    rate.powi(rounds as i32) * initial_sq_dist
        + noise_factor * gamma * params.sigma_sq_total / (params.mu * z)
}

/// Four-term bound of the decreasing schedule at total iteration count `T`:
/// `4 (1+2q)^2 kappa^2 tau^2 D0 / (e T^2) + 4 (1+q) sigma^2 / (mu^2 T)
///  + 4 (1+2q)^2 kappa tau sigma^2 (1 + 2 tau / sqrt(kappa)) / (mu^2 T^2)
///  + 32 (1+q) tau^2 L_max sigma^2 log T / (mu^3 T^2)`.
pub fn decreasing_rate_bound(
    params: &ProblemParameters,
    tau: u64,
    total_iters: u64,
    initial_sq_dist: f64,
) -> f64 {
    let t = total_iters as f64;
    let tau_f = tau as f64;
    let (mu, kappa, q) = (params.mu, params.kappa, params.q);
    let sigma_sq = params.sigma_sq_total;
    let one_2q = 1.0 + 2.0 * q;
    let one_q = 1.0 + q;
    4.0 * one_2q * one_2q * kappa * kappa * tau_f * tau_f * initial_sq_dist
        / (std::f64::consts::E * t * t)
        + 4.0 * one_q * sigma_sq / (mu * mu * t)
        + 4.0 * one_2q * one_2q * kappa * tau_f * sigma_sq * (1.0 + 2.0 * tau_f / kappa.sqrt())
            / (mu * mu * t * t)
        + 32.0 * one_q * tau_f * tau_f * params.l_max * sigma_sq * t.ln() / (mu * mu * mu * t * t)
}

fn admissible(params: &ProblemParameters, gamma: f64, tau: u64) -> bool {
    gamma > 0.0 && gamma <= StepSizeSchedule::theoretical_gamma_cap(params, tau)
}

/// Verifies the deterministic linear rate on a recorded trajectory: the
/// per-round contraction `D_{p+1} <= (1 - gamma tau mu zeta) D_p` and the
/// unrolled end-to-end bound, both up to relative tolerance `tol`.
/// Reports the end-to-end tightness ratio (observed / bound) as detail.
pub fn check_contraction(
    trajectory: &Trajectory,
    params: &ProblemParameters,
    gamma: f64,
    tau: u64,
    tol: f64,
) -> BoundReport {
    const NAME: &str = "deterministic-contraction";
    if !admissible(params, gamma, tau) {
        return BoundReport::inapplicable(
            NAME,
            format!(
                "gamma = {gamma:.6e} exceeds the admissible cap {:.6e}",
                StepSizeSchedule::theoretical_gamma_cap(params, tau)
            ),
        );
    }
    if trajectory.gammas.iter().any(|&g| g != gamma) {
        return BoundReport::inapplicable(NAME, "trajectory was not run at the stated constant gamma");
    }
    let rate = contraction_rate(params, gamma, tau);
    let dists: Vec<f64> =
        trajectory.records.iter().map(|r| r.iterate.sq_dist(&trajectory.x_star)).collect();
    let mut worst = f64::NEG_INFINITY;
    for p in 0..dists.len().saturating_sub(1) {
        if dists[p] > 0.0 && rate > 0.0 {
            worst = worst.max(dists[p + 1] / (rate * dists[p]) - 1.0);
        } else {
            // A zero-distance iterate must stay at the equilibrium.
            worst = worst.max(if dists[p + 1] == 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
        }
    }
    let rounds = dists.len() as u64 - 1;
    let mut detail = String::new();
    if let (Some(&first), Some(&last)) = (dists.first(), dists.last()) {
        if first > 0.0 {
            let bound = rate.powi(rounds as i32) * first;
            if bound > 0.0 {
                worst = worst.max(last / bound - 1.0);
                detail = format!("end-to-end tightness ratio = {:.3e}", last / bound);
            }
        }
    }
    let mut report = BoundReport::evaluate(NAME, rounds, tol, worst);
    if !detail.is_empty() {
        report = report.with_detail(detail);
    }
    report
}

/// Monte Carlo check of the constant-step neighborhood bound: the sample
/// mean of `||x_{tau R} - x*||^2` over `n_seeds` replicates must not exceed
/// the bound plus three standard errors.
pub fn check_neighborhood(
    problem: &dyn GameProblem,
    x0: &JointAction,
    params: &ProblemParameters,
    gamma: f64,
    tau: u64,
    rounds: u64,
    n_seeds: u64,
    seed: u64,
) -> BoundReport {
    const NAME: &str = "stochastic-neighborhood";
    if !admissible(params, gamma, tau) {
        return BoundReport::inapplicable(
            NAME,
            format!(
                "gamma = {gamma:.6e} exceeds the admissible cap {:.6e}",
                StepSizeSchedule::theoretical_gamma_cap(params, tau)
            ),
        );
    }
    let finals: Vec<f64> = (0..n_seeds)
        .into_par_iter()
        .map(|r| {
            let config = RunConfig::new(
                tau,
                rounds,
                ScheduleKind::Constant { gamma },
                Mode::Stochastic,
                seed,
            )
            .with_replicate(r);
            run_pearl_sgd(problem, x0, &config)
                .map(|t| t.final_sq_dist())
                .expect("constant-gamma run cannot fail to configure")
        })
        .collect();
    let estimate = mean(&finals);
    let ci = ci_half_width(&finals, 3.0);
    let bound = neighborhood_bound(params, gamma, tau, rounds, x0.sq_dist(&problem_x_star(problem)));
    BoundReport::evaluate(NAME, n_seeds, 0.0, estimate - (bound + ci))
        .with_ci(ci)
        .with_detail(format!("estimate = {estimate:.6e}, bound = {bound:.6e}"))
}

fn problem_x_star(problem: &dyn GameProblem) -> JointAction {
    crate::params::reference_equilibrium(problem)
        .expect("problems under test expose an equilibrium")
        .0
}

/// Monte Carlo estimate at one grid point of the decreasing-schedule check.
#[derive(Debug, Clone, Copy)]
pub struct HorizonEstimate {
    pub total_iters: u64,
    /// Sample mean of `||x_T - x*||^2`.
    pub mean_sq_dist: f64,
    pub ci_half_width: f64,
    /// Four-term theoretical bound at this `T`.
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct DecreasingRateCheck {
    pub reports: Vec<BoundReport>,
    pub estimates: Vec<HorizonEstimate>,
}

impl DecreasingRateCheck {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }
}

/// Verifies the decreasing schedule: the four-term bound at every `T` in
/// `t_grid` (Monte Carlo, three standard errors of slack), the `O(1/T)`
/// trend `E[T -> 2T]` ratio `<= 0.75` on grid pairs where the `1/T` noise
/// term dominates the bound, and the exact switch-point values of the
/// schedule itself.
pub fn check_decreasing_rate(
    problem: &dyn GameProblem,
    x0: &JointAction,
    params: &ProblemParameters,
    tau: u64,
    t_grid: &[u64],
    n_seeds: u64,
    seed: u64,
) -> DecreasingRateCheck {
    const BOUND_NAME: &str = "decreasing-rate-bound";
    const TREND_NAME: &str = "decreasing-rate-trend";
    const SWITCH_NAME: &str = "decreasing-schedule-switch";

    if t_grid.iter().any(|&t| t == 0 || t % tau != 0) {
        return DecreasingRateCheck {
            reports: vec![BoundReport::inapplicable(
                BOUND_NAME,
                "every T in the grid must be a positive multiple of tau",
            )],
            estimates: Vec::new(),
        };
    }
    let d0 = x0.sq_dist(&problem_x_star(problem));

    // Monte Carlo estimates of E ||x_T - x*||^2 per grid point.
    let estimates: Vec<HorizonEstimate> = t_grid
        .iter()
        .map(|&t| {
            let rounds = t / tau;
            let finals: Vec<f64> = (0..n_seeds)
                .into_par_iter()
                .map(|r| {
                    let config =
                        RunConfig::new(tau, rounds, ScheduleKind::Decreasing, Mode::Stochastic, seed)
                            .with_replicate(r);
                    run_pearl_sgd(problem, x0, &config)
                        .map(|traj| traj.final_sq_dist())
                        .expect("decreasing run configures for QSM problems")
                })
                .collect();
            HorizonEstimate {
                total_iters: t,
                mean_sq_dist: mean(&finals),
                ci_half_width: ci_half_width(&finals, 3.0),
                bound: decreasing_rate_bound(params, tau, t, d0),
            }
        })
        .collect();

    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_ci = 0.0_f64;
    for est in &estimates {
        worst_bound = worst_bound.max(est.mean_sq_dist - (est.bound + est.ci_half_width));
        worst_ci = worst_ci.max(est.ci_half_width);
    }
    let bound_report = BoundReport::evaluate(BOUND_NAME, t_grid.len() as u64, 0.0, worst_bound)
        .with_ci(worst_ci);

    // Trend on qualifying doubling pairs: the 1/T term must dominate the
    // bound at both ends before the 0.75 ratio is asserted.
    let dominant = |t: u64| {
        let total = decreasing_rate_bound(params, tau, t, d0);
        let noise = 4.0 * (1.0 + params.q) * params.sigma_sq_total
            / (params.mu * params.mu * t as f64);
        noise >= total - noise
    };
    let mut pairs = 0u64;
    let mut worst_trend = f64::NEG_INFINITY;
    for (i, &t) in t_grid.iter().enumerate() {
        if let Some(j) = t_grid.iter().position(|&t2| t2 == 2 * t) {
            if dominant(t) && dominant(2 * t) && estimates[i].mean_sq_dist > 0.0 {
                pairs += 1;
                worst_trend =
                    worst_trend.max(estimates[j].mean_sq_dist / estimates[i].mean_sq_dist - 0.75);
            }
        }
    }
    let trend_report = if pairs == 0 {
        BoundReport::inapplicable(TREND_NAME, "no doubling pair with a dominant noise term")
    } else {
        BoundReport::evaluate(TREND_NAME, pairs, 0.0, worst_trend)
    };

    // Exact evaluation of the schedule on both sides of its switch round.
    let schedule = StepSizeSchedule::resolve(ScheduleKind::Decreasing, params, tau)
        .expect("tau >= 1 by construction");
    let p0 = schedule.switch_round().expect("decreasing schedule has a switch round");
    let tau_f = tau as f64;
    let constant_phase = 1.0 / (params.ell * tau_f * (1.0 + 2.0 * params.q));
    let p0f = p0 as f64;
    let decay_phase = (2.0 * p0f + 1.0) / (tau_f * params.mu * (p0f + 1.0) * (p0f + 1.0));
    let switch_defect = (schedule.gamma(p0.saturating_sub(1)) - constant_phase)
        .abs()
        .max((schedule.gamma(p0) - decay_phase).abs());
    let switch_report = BoundReport::evaluate(SWITCH_NAME, 2, 0.0, switch_defect)
        .with_detail(format!("switch round p0 = {p0}"));

    DecreasingRateCheck { reports: vec![bound_report, trend_report, switch_report], estimates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::compute_parameters;
    use crate::problems::minimax::QuadraticMinimaxGame;
    use crate::problems::noise::AdditiveGaussianNoise;
    use crate::verify::Verdict;

    #[test]
    fn classic_descent_rate_at_tau_one() {
        // tau = 1, gamma = 1/ell: zeta = 2 - gamma ell = 1 and the factor is
        // the classical 1 - mu/ell.
        let game = QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0);
        let params = compute_parameters(&game).unwrap();
        let gamma = 1.0 / params.ell;
        assert!((zeta(&params, gamma, 1) - 1.0).abs() < 1e-12);
        let rate = contraction_rate(&params, gamma, 1);
        assert!((rate - (1.0 - params.mu / params.ell)).abs() < 1e-12);

        let x0 = JointAction::ones(game.layout().clone());
        let config = RunConfig::new(1, 60, ScheduleKind::Constant { gamma }, Mode::Deterministic, 0);
        let trajectory = run_pearl_sgd(&game, &x0, &config).unwrap();
        let report = check_contraction(&trajectory, &params, gamma, 1, 1e-9);
        assert!(report.passed(), "{}", report.summary_line());
        // End-to-end: final distance under rate^R * D0.
        assert!(trajectory.final_sq_dist() <= rate.powi(60) * trajectory.initial_sq_dist * (1.0 + 1e-9));
    }

    #[test]
    fn oversized_gamma_is_inapplicable_not_failed() {
        let game = QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0);
        let params = compute_parameters(&game).unwrap();
        let tau = 4;
        let cap = StepSizeSchedule::theoretical_gamma_cap(&params, tau);
        let gamma = cap * 1.01;
        let x0 = JointAction::ones(game.layout().clone());
        let config = RunConfig::new(tau, 10, ScheduleKind::Constant { gamma }, Mode::Deterministic, 0);
        let trajectory = run_pearl_sgd(&game, &x0, &config).unwrap();
        let report = check_contraction(&trajectory, &params, gamma, tau, 1e-9);
        assert_eq!(report.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn neighborhood_reduces_to_contraction_when_noiseless() {
        let game = QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0);
        let params = compute_parameters(&game).unwrap();
        assert_eq!(params.sigma_sq_total, 0.0);
        let gamma = StepSizeSchedule::theoretical_gamma_cap(&params, 3);
        let d0 = 2.0;
        let with_noise_term = neighborhood_bound(&params, gamma, 3, 25, d0);
        let pure_linear = contraction_rate(&params, gamma, 3).powi(25) * d0;
        assert_eq!(with_noise_term, pure_linear);
        // The single-summand oracle is exact, so the stochastic check is the
        // deterministic one.
        let x0 = JointAction::ones(game.layout().clone());
        let report = check_neighborhood(&game, &x0, &params, gamma, 3, 25, 8, 5);
        assert!(report.passed(), "{}", report.summary_line());
    }

    #[test]
    fn noiseless_decreasing_rate_reduces_to_first_term() {
        // sigma = 0 kills three of the four terms; the estimate must sit
        // under 4 (1+2q)^2 kappa^2 tau^2 D0 / (e T^2) alone.
        let game = QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0);
        let params = compute_parameters(&game).unwrap();
        assert_eq!(params.sigma_sq_total, 0.0);
        let x0 = JointAction::ones(game.layout().clone());
        let d0 = 2.0;
        let tau = 2;
        for t in [64u64, 128] {
            let bound = decreasing_rate_bound(&params, tau, t, d0);
            let tf = t as f64;
            let first_term = 4.0
                * (1.0 + 2.0 * params.q).powi(2)
                * params.kappa.powi(2)
                * (tau as f64).powi(2)
                * d0
                / (std::f64::consts::E * tf * tf);
            assert_eq!(bound, first_term);
        }
        let check = check_decreasing_rate(&game, &x0, &params, tau, &[64, 128], 4, 3);
        let bound_report = &check.reports[0];
        assert!(bound_report.passed(), "{}", bound_report.summary_line());
    }

    #[test]
    fn reports_reproduce_bit_for_bit() {
        let game = AdditiveGaussianNoise::new(QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0), 0.5);
        let params = compute_parameters(&game).unwrap();
        let x0 = JointAction::ones(game.layout().clone());
        let gamma = StepSizeSchedule::theoretical_gamma_cap(&params, 2);
        let a = check_neighborhood(&game, &x0, &params, gamma, 2, 20, 32, 9);
        let b = check_neighborhood(&game, &x0, &params, gamma, 2, 20, 32, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn tau_one_neighborhood_is_classical() {
        // At tau = 1 the drift factor vanishes: bound = rate^R D0 +
        // gamma sigma^2 / (mu zeta), with zeta >= 1 so the noise term is at
        // most gamma sigma^2 / mu.
        let game = AdditiveGaussianNoise::new(QuadraticMinimaxGame::scalar(1.0, 1.0, 1.0), 0.5);
        let params = compute_parameters(&game).unwrap();
        let gamma = 0.9 / params.ell;
        let d0 = 2.0;
        let bound = neighborhood_bound(&params, gamma, 1, 40, d0);
        let rate = contraction_rate(&params, gamma, 1);
        let linear = rate.powi(40) * d0;
        assert!(bound >= linear);
        assert!(bound - linear <= gamma * params.sigma_sq_total / params.mu + 1e-15);
    }
}

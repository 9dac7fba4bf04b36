//! Monte Carlo checks of the local-phase bounds for a single player running
//! SGD against a frozen complement: the near-monotonicity of the expected
//! squared gradient norm, and the local iterate-drift bound.

use rayon::prelude::*;

use crate::game::{GameProblem, JointAction, ProblemParameters};
use crate::linalg::{ci_half_width, mean};
use crate::rng::RngStream;
use crate::verify::BoundReport;

/// Per-chain records: value[t][chain] for offsets `t = 0..=tau`.
struct ChainStats {
    grad_norm_sq: Vec<Vec<f64>>,
    drift_sq: Vec<Vec<f64>>,
    base_grad_norm_sq: f64,
}

/// `n_chains` independent local-SGD chains of length `tau` for one player,
/// started at `x_start` with the complement frozen there.
fn run_chains(
    problem: &dyn GameProblem,
    player: usize,
    x_start: &JointAction,
    gamma: f64,
    tau: u64,
    n_chains: u64,
    seed: u64,
) -> ChainStats {
    let stream = RngStream::new(seed);
    let base_grad_norm_sq = problem.grad(player, x_start).norm_squared();
    let per_chain: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut scratch = x_start.clone();
            let start_block = x_start.block(player).to_vec();
            let mut grads = Vec::with_capacity(tau as usize + 1);
            let mut drifts = Vec::with_capacity(tau as usize + 1);
            for t in 0..=tau {
                grads.push(problem.grad(player, &scratch).norm_squared());
                let drift: f64 = scratch
                    .block(player)
                    .iter()
                    .zip(&start_block)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                drifts.push(drift);
                if t < tau {
                    let mut rng = stream.draw(player, t, chain);
                    let g = problem.stoch_grad(player, &scratch, &mut rng).value;
                    let block = scratch.block_mut(player);
                    for (b, gv) in block.iter_mut().zip(g.iter()) {
                        *b -= gamma * gv;
                    }
                }
            }
            (grads, drifts)
        })
        .collect();

    let offsets = tau as usize + 1;
    let mut grad_norm_sq = vec![Vec::with_capacity(n_chains as usize); offsets];
    let mut drift_sq = vec![Vec::with_capacity(n_chains as usize); offsets];
    for (grads, drifts) in per_chain {
        for t in 0..offsets {
            grad_norm_sq[t].push(grads[t]);
            drift_sq[t].push(drifts[t]);
        }
    }
    ChainStats { grad_norm_sq, drift_sq, base_grad_norm_sq }
}

fn local_gamma_cap(l_i: f64, tau: u64) -> f64 {
    if tau <= 1 {
        1.0 / l_i
    } else {
        (1.0 / l_i).min(1.0 / (l_i * (tau - 1) as f64))
    }
}

/// Checks `E ||grad_i(x_t)||^2 <= ||grad_i(x_0)||^2 + 2 t gamma L_i sigma_i^2`
/// at every offset `t = 0..=tau`, with three standard errors of Monte Carlo
/// slack. Requires `gamma <= (1/L_i) min(1, 1/(tau - 1))`.
pub fn check_gradnorm_drift(
    problem: &dyn GameProblem,
    player: usize,
    x_start: &JointAction,
    params: &ProblemParameters,
    gamma: f64,
    tau: u64,
    n_chains: u64,
    seed: u64,
) -> BoundReport {
    const NAME: &str = "local-gradnorm-drift";
    let l_i = params.l_per_player[player];
    let sigma_i = params.sigma_per_player[player];
    if !(gamma > 0.0 && gamma <= local_gamma_cap(l_i, tau)) {
        return BoundReport::inapplicable(
            NAME,
            format!("gamma = {gamma:.6e} above local cap {:.6e}", local_gamma_cap(l_i, tau)),
        );
    }
    let stats = run_chains(problem, player, x_start, gamma, tau, n_chains, seed);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_ci = 0.0_f64;
    for (t, values) in stats.grad_norm_sq.iter().enumerate() {
        let bound =
            stats.base_grad_norm_sq + 2.0 * t as f64 * gamma * l_i * sigma_i * sigma_i;
        let ci = ci_half_width(values, 3.0);
        worst = worst.max(mean(values) - (bound + ci));
        worst_ci = worst_ci.max(ci);
    }
    // The offset-zero identity has no CI; allow summation rounding only.
    let tol = 1e-12 * stats.base_grad_norm_sq.max(1.0);
    BoundReport::evaluate(NAME, (tau + 1) * n_chains, tol, worst).with_ci(worst_ci)
}

/// Checks the local drift bound
/// `E ||x_0^i - x_t^i||^2 <= gamma^2 t^2 ||grad_i(x_0)||^2
///  + gamma^2 t (1 + 2 (t-1)(t+1) gamma L_i) sigma_i^2`
/// at every offset `t = 0..=tau`, with three standard errors of slack.
pub fn check_local_error(
    problem: &dyn GameProblem,
    player: usize,
    x_start: &JointAction,
    params: &ProblemParameters,
    gamma: f64,
    tau: u64,
    n_chains: u64,
    seed: u64,
) -> BoundReport {
    const NAME: &str = "local-iterate-error";
    let l_i = params.l_per_player[player];
    let sigma_i = params.sigma_per_player[player];
    if !(gamma > 0.0 && gamma <= local_gamma_cap(l_i, tau)) {
        return BoundReport::inapplicable(
            NAME,
            format!("gamma = {gamma:.6e} above local cap {:.6e}", local_gamma_cap(l_i, tau)),
        );
    }
    let stats = run_chains(problem, player, x_start, gamma, tau, n_chains, seed);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_ci = 0.0_f64;
    for (t, values) in stats.drift_sq.iter().enumerate() {
        let tf = t as f64;
        let bound = gamma * gamma * tf * tf * stats.base_grad_norm_sq
            + gamma * gamma * tf * (1.0 + 2.0 * (tf - 1.0) * (tf + 1.0) * gamma * l_i)
                * sigma_i
                * sigma_i;
        let ci = ci_half_width(values, 3.0);
        worst = worst.max(mean(values) - (bound + ci));
        worst_ci = worst_ci.max(ci);
    }
    // Summation-rounding allowance for the exact t = 0 / t = 1 identities.
    let tol = 1e-12 * (gamma * gamma * stats.base_grad_norm_sq).max(1e-300);
    BoundReport::evaluate(NAME, (tau + 1) * n_chains, tol, worst).with_ci(worst_ci)
}

//! Step-size rules. Every rule resolves against the problem constants
//! captured at construction and yields a step size that is constant within
//! each synchronization round.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::ProblemParameters;

/// Which step-size rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Fixed, user-chosen constant.
    Constant { gamma: f64 },
    /// The tight constant `gamma = 1 / (ell tau + 2 (tau - 1) L_max sqrt(kappa))`.
    Theoretical,
    /// Variant with half the drift margin,
    /// `gamma = 1 / (ell tau + (tau - 1) L_max sqrt(kappa))`; kept as its own
    /// rule rather than silently merged with `Theoretical`.
    TheoreticalRobot,
    /// Constant tuned to a fixed iteration budget `T`:
    /// `gamma = 1 / (mu eta (1 + 2q))` with `eta log eta = T / (2 (1 + 2q))`.
    Horizon { total_iters: u64 },
    /// Constant `1 / (ell tau (1 + 2q))` until round `2 (1 + 2q) kappa`, then
    /// the decreasing rule `(2p + 1) / (tau mu (p + 1)^2)`.
    Decreasing,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("step size must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("synchronization interval tau must be at least 1")]
    ZeroTau,
    #[error(
        "iteration budget {total_iters} is too small: it solves to eta = {eta:.6}, \
         but the rule needs eta > kappa tau = {kappa_tau:.6}; \
         the smallest admissible budget is T > {min_total_iters:.6}"
    )]
    HorizonTooShort { total_iters: f64, eta: f64, kappa_tau: f64, min_total_iters: f64 },
    #[error("iteration budget {0} is too small to solve eta log eta = T / (2 (1 + 2q)) with eta >= e")]
    HorizonBelowSolverRange(f64),
}

/// Solves `eta log eta = total_iters / (2 (1 + 2q))` by bisection on
/// `[e, max(total_iters, e + 1)]`, where the map is strictly increasing, to a
/// relative tolerance of 1e-12.
pub fn solve_eta(total_iters: f64, q: f64) -> Result<f64, ScheduleError> {
    let target = total_iters / (2.0 * (1.0 + 2.0 * q));
    let e = std::f64::consts::E;
    if !target.is_finite() || target < e * e.ln() {
        return Err(ScheduleError::HorizonBelowSolverRange(total_iters));
    }
    let f = |eta: f64| eta * eta.ln();
    let mut lo = e;
    let mut hi = total_iters.max(e + 1.0);
    while f(hi) < target {
        hi *= 2.0;
    }
    if f(lo) >= target {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Full horizon-rule resolution: solves for `eta`, enforces the
/// admissibility condition `eta > kappa tau`, and returns `(eta, gamma)`
/// with `gamma = 1 / (mu eta (1 + 2q))`.
pub fn horizon_step_size(
    total_iters: f64,
    params: &ProblemParameters,
    tau: u64,
) -> Result<(f64, f64), ScheduleError> {
    if tau == 0 {
        return Err(ScheduleError::ZeroTau);
    }
    let q = params.q;
    let eta = solve_eta(total_iters, q)?;
    let kappa_tau = params.kappa * tau as f64;
    if eta <= kappa_tau {
        let floor = kappa_tau.max(std::f64::consts::E);
        let min_total_iters = 2.0 * (1.0 + 2.0 * q) * floor * floor.ln();
        return Err(ScheduleError::HorizonTooShort { total_iters, eta, kappa_tau, min_total_iters });
    }
    Ok((eta, 1.0 / (params.mu * eta * (1.0 + 2.0 * q))))
}

/// A schedule resolved against `(params, tau)`: yields the step size for any
/// round index.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeSchedule {
    kind: ScheduleKind,
    tau: u64,
    mu: f64,
    ell: f64,
    q: f64,
    /// Constant value for the constant-family rules, resolved once.
    resolved_constant: Option<f64>,
    /// First round on which `Decreasing` switches to the decaying rule.
    switch_round: Option<u64>,
}

impl StepSizeSchedule {
    pub fn resolve(
        kind: ScheduleKind,
        params: &ProblemParameters,
        tau: u64,
    ) -> Result<Self, ScheduleError> {
        if tau == 0 {
            return Err(ScheduleError::ZeroTau);
        }
        let (mu, ell, l_max, kappa, q) =
            (params.mu, params.ell, params.l_max, params.kappa, params.q);
        let tau_f = tau as f64;
        let resolved_constant = match kind {
            ScheduleKind::Constant { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(ScheduleError::BadGamma(gamma));
                }
                Some(gamma)
            }
            ScheduleKind::Theoretical => {
                Some(1.0 / (ell * tau_f + 2.0 * (tau_f - 1.0) * l_max * kappa.sqrt()))
            }
            ScheduleKind::TheoreticalRobot => {
                Some(1.0 / (ell * tau_f + (tau_f - 1.0) * l_max * kappa.sqrt()))
            }
            ScheduleKind::Horizon { total_iters } => {
                Some(horizon_step_size(total_iters as f64, params, tau)?.1)
            }
            ScheduleKind::Decreasing => None,
        };
        let switch_round = match kind {
            // First integer p with p >= 2 (1 + 2q) kappa.
            ScheduleKind::Decreasing => Some((2.0 * (1.0 + 2.0 * q) * kappa).ceil() as u64),
            _ => None,
        };
        Ok(Self { kind, tau, mu, ell, q, resolved_constant, switch_round })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    /// Step size used throughout round `p`.
    pub fn gamma(&self, round: u64) -> f64 {
        match self.kind {
            ScheduleKind::Decreasing => {
                if round < self.switch_round.expect("resolved for decreasing") {
                    1.0 / (self.ell * self.tau as f64 * (1.0 + 2.0 * self.q))
                } else {
                    let p = round as f64;
                    (2.0 * p + 1.0) / (self.tau as f64 * self.mu * (p + 1.0) * (p + 1.0))
                }
            }
            _ => self.resolved_constant.expect("constant-family rule"),
        }
    }

    /// Round at which the decreasing rule leaves its constant phase.
    pub fn switch_round(&self) -> Option<u64> {
        self.switch_round
    }

    /// Largest constant admitted by the contraction analysis for `tau`.
    pub fn theoretical_gamma_cap(params: &ProblemParameters, tau: u64) -> f64 {
        let tau_f = tau as f64;
        1.0 / (params.ell * tau_f + 2.0 * (tau_f - 1.0) * params.l_max * params.kappa.sqrt())
    }
}

//! Numerical verification of the convergence analysis at desk scale: sampled
//! assumption checks, per-round contraction bounds, Monte Carlo neighborhood
//! and local-error bounds. Failures are reported, not thrown; a
//! precondition-violating configuration yields an `Inapplicable` verdict
//! rather than a failure.

pub mod assumptions;
pub mod lemmas;
pub mod theorems;

use serde::{Deserialize, Serialize};

pub use assumptions::{check_assumptions, sine_witness_reports, AssumptionTols};
pub use lemmas::{check_gradnorm_drift, check_local_error};
pub use theorems::{
    check_contraction, check_decreasing_rate, check_neighborhood, contraction_rate,
    decreasing_rate_bound, neighborhood_bound, zeta, DecreasingRateCheck, HorizonEstimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The check's preconditions do not hold (e.g. step size outside the
    /// admissible range); distinct from a failure.
    Inapplicable,
}

/// Outcome of one bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    /// Rounds, points, or offsets checked.
    pub checks: u64,
    pub tolerance: f64,
    /// Signed worst slack: negative means satisfied with margin.
    pub max_violation: f64,
    /// Monte Carlo half-width already folded into the bound, when any.
    pub ci_half_width: Option<f64>,
    pub verdict: Verdict,
    pub detail: Option<String>,
}

impl BoundReport {
    /// Pass if and only if `max_violation <= tolerance`.
    pub fn evaluate(name: &str, checks: u64, tolerance: f64, max_violation: f64) -> Self {
        let verdict =
            if max_violation <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Self {
            name: name.to_string(),
            checks,
            tolerance,
            max_violation,
            ci_half_width: None,
            verdict,
            detail: None,
        }
    }

    pub fn with_ci(mut self, ci_half_width: f64) -> Self {
        self.ci_half_width = Some(ci_half_width);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn inapplicable(name: &str, reason: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            checks: 0,
            tolerance: 0.0,
            max_violation: f64::NAN,
            ci_half_width: None,
            verdict: Verdict::Inapplicable,
            detail: Some(reason.into()),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// One-line rendering for logs and CI pipelines.
    pub fn summary_line(&self) -> String {
        let ci = self
            .ci_half_width
            .map(|c| format!(", ci = {c:.3e}"))
            .unwrap_or_default();
        match self.verdict {
            Verdict::Inapplicable => format!(
                "INAPPLICABLE {name}: {reason}",
                name = self.name,
                reason = self.detail.as_deref().unwrap_or("precondition violated")
            ),
            v => format!(
                "{verdict} {name}: checks = {checks}, max violation = {viol:.3e}, tol = {tol:.1e}{ci}",
                verdict = if v == Verdict::Pass { "PASS" } else { "FAIL" },
                name = self.name,
                checks = self.checks,
                viol = self.max_violation,
                tol = self.tolerance,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_tolerance() {
        assert!(BoundReport::evaluate("x", 1, 1e-8, 0.5e-8).passed());
        assert!(BoundReport::evaluate("x", 1, 1e-8, -3.0).passed());
        assert!(!BoundReport::evaluate("x", 1, 1e-8, 2e-8).passed());
        let inapp = BoundReport::inapplicable("x", "gamma too large");
        assert_eq!(inapp.verdict, Verdict::Inapplicable);
        assert!(!inapp.passed());
    }
}

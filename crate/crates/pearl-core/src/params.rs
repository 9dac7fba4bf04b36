//! Problem analysis: equilibrium solving for affine joint gradients and
//! measurement of the constants (mu, ell, L_i, sigma_i) that the step-size
//! rules consume.

use nalgebra::DVector;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::game::{GameProblem, JointAction, ParameterError, ProblemParameters};
use crate::linalg::{sample_ball, spectral_norm, symmetric_part_eigen_range};
use crate::rng::RngStream;

/// Residual ceiling for an accepted equilibrium solve.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("joint gradient is not affine; no linear equilibrium solve")]
    NotAffine,
    #[error("joint system matrix is singular: equilibrium is not unique")]
    SingularSystem,
    #[error("equilibrium residual {residual:.3e} exceeds {tol:.1e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("measured mu = {mu:.3e} is not positive: quasi-strong monotonicity fails")]
    QsmFails { mu: f64 },
    #[error("problem exposes neither an affine form nor analytic parameters")]
    NotComputable,
    #[error("problem provides no equilibrium and no parameters for the long-run fallback")]
    NoEquilibriumPath,
    #[error(transparent)]
    BadParameters(#[from] ParameterError),
}

/// Solves `F(x) = M x + b = 0` by dense LU with partial pivoting and returns
/// the equilibrium together with its residual `||F(x*)||`. A singular system
/// is an explicit error, never a least-squares answer.
pub fn solve_affine_equilibrium(
    problem: &dyn GameProblem,
) -> Result<(JointAction, f64), AnalysisError> {
    let (m, b) = problem.affine_form().ok_or(AnalysisError::NotAffine)?;
    let lu = m.clone().lu();
    let x = lu.solve(&(-&b)).ok_or(AnalysisError::SingularSystem)?;
    let residual = (&m * &x + &b).norm();
    if !residual.is_finite() || residual > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(AnalysisError::ResidualTooLarge {
            residual,
            tol: EQUILIBRIUM_RESIDUAL_TOL,
        });
    }
    let x = JointAction::new(problem.layout().clone(), x)
        .expect("affine form dimension matches layout");
    Ok((x, residual))
}

/// Measures the problem constants.
///
/// Analytic parameters, when a problem supplies them, win outright (they may
/// encode a tighter `ell` than the `L^2/mu` default). Otherwise the affine
/// form `F(x) = M x + b` is required and:
///
/// * `mu   = lambda_min((M + M^T)/2)`
/// * `L    = ||M||_2`, `ell = L^2 / mu`
/// * `L_i  = ||M_ii||_2` (diagonal block of the Jacobian)
/// * `sigma_i` from the problem's exact bound when known, else zero
///   (use [`estimate_sigma`] + [`ProblemParameters::with_sigma`] to fill in
///   empirical values).
pub fn compute_parameters(problem: &dyn GameProblem) -> Result<ProblemParameters, AnalysisError> {
    if let Some(params) = problem.analytic_params() {
        return Ok(params);
    }
    let (m, _) = problem.affine_form().ok_or(AnalysisError::NotComputable)?;
    let (mu, _) = symmetric_part_eigen_range(&m);
    if mu <= 0.0 {
        return Err(AnalysisError::QsmFails { mu });
    }
    let lipschitz = spectral_norm(&m);
    let ell = lipschitz * lipschitz / mu;
    let layout = problem.layout();
    let l_per_player = (0..layout.n())
        .map(|i| {
            let block = m
                .view((layout.offset(i), layout.offset(i)), (layout.dim(i), layout.dim(i)))
                .into_owned();
            spectral_norm(&block)
        })
        .collect::<Vec<_>>();
    let sigma = problem.sigma_bound().unwrap_or_else(|| vec![0.0; layout.n()]);
    Ok(ProblemParameters::new(mu, ell, l_per_player, sigma)?)
}

/// Empirical per-player noise levels: the largest mean squared deviation of
/// `stoch_grad` from `grad` over sampled points (the equilibrium plus
/// `n_points` draws from the radius-10 ball around it), inflated to the upper
/// 99% chi-square confidence bound.
pub fn estimate_sigma(
    problem: &dyn GameProblem,
    n_points: usize,
    n_draws: usize,
    seed: u64,
) -> Vec<f64> {
    let layout = problem.layout().clone();
    let stream = RngStream::new(seed);
    let center = problem
        .equilibrium()
        .map(|x| x.values().clone())
        .unwrap_or_else(|| DVector::zeros(layout.total_dim()));

    let mut points = Vec::with_capacity(n_points + 1);
    points.push(center.clone());
    for k in 0..n_points {
        let mut rng = stream.labeled(1_000 + k as u64);
        points.push(sample_ball(&center, 10.0, &mut rng));
    }

    (0..layout.n())
        .map(|player| {
            let mut worst = 0.0_f64;
            for (p_idx, point) in points.iter().enumerate() {
                let x = JointAction::new(layout.clone(), point.clone()).expect("ball sample");
                let exact = problem.grad(player, &x);
                let mut acc = 0.0;
                for draw in 0..n_draws {
                    let mut rng = stream.draw(player, draw as u64, p_idx as u64);
                    let sample = problem.stoch_grad(player, &x, &mut rng);
                    acc += (sample.value - &exact).norm_squared();
                }
                worst = worst.max(acc / n_draws as f64);
            }
            let dof = (n_draws * layout.dim(player)) as f64;
            let quantile = ChiSquared::new(dof)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.01);
            (worst * dof / quantile).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumSource {
    Problem,
    LongRunFallback,
}

/// Reference equilibrium for error reporting: the problem's own solution if
/// it has one, otherwise a long gradient-play run `x <- x - gamma F(x)` with
/// `gamma = 1/(10 ell)` for 10^6 steps.
pub fn reference_equilibrium(
    problem: &dyn GameProblem,
) -> Result<(JointAction, f64, EquilibriumSource), AnalysisError> {
    use crate::game::joint_gradient;
    if let Some(x) = problem.equilibrium() {
        let residual = joint_gradient(problem, &x).expect("layout matches").norm();
        return Ok((x, residual, EquilibriumSource::Problem));
    }
    let params = compute_parameters(problem).map_err(|_| AnalysisError::NoEquilibriumPath)?;
    let gamma = 1.0 / (10.0 * params.ell);
    let mut x = JointAction::ones(problem.layout().clone());
    for _ in 0..1_000_000 {
        let f = joint_gradient(problem, &x).expect("layout matches");
        *x.values_mut() -= gamma * f;
    }
    let residual = joint_gradient(problem, &x).expect("layout matches").norm();
    Ok((x, residual, EquilibriumSource::LongRunFallback))
}

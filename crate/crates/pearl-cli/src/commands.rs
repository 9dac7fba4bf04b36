//! Execution of the resolved experiment configurations and emission of their
//! artifact directories.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use pearl_core::engine::{
    csv_string, heatmap_grid, run_pearl_sgd, sweep_tau, tune_gamma, Mode,
    RunConfig, ScheduleKind, StepSizeSchedule, SweepConfig,
};
use pearl_core::game::{GameProblem, ProblemParameters};
use pearl_core::params::{compute_parameters, estimate_sigma, reference_equilibrium};
use pearl_core::problems::{AnyProblem, ProblemFile};
use pearl_core::verify::{
    check_assumptions, check_contraction, check_decreasing_rate, check_gradnorm_drift,
    check_local_error, check_neighborhood, sine_witness_reports, AssumptionTols, BoundReport,
};

use crate::artifacts::{compare_artifacts, ArtifactDir, Metadata, Summary, SummaryEntry};
use crate::config::{CommandKind, ExperimentConfig};

/// Runs `config` into `out`, returning a human-readable closing line.
pub fn execute(config: &ExperimentConfig, out: &Path) -> Result<String> {
    config.run.validate()?;
    let problem = config.problem.build()?;
    let dir = ArtifactDir::create(out.to_path_buf())?;

    // Every artifact directory is self-describing: the resolved config, the
    // exact problem instance, and the metadata sidecar.
    let problem_file = ProblemFile::from_problem(&problem);
    dir.write("config.toml", &config.to_toml())?;
    dir.write("problem.json", &problem_file.to_json())?;

    let closing = match config.command {
        CommandKind::Run => cmd_run(config, &problem, &dir)?,
        CommandKind::SweepTau => cmd_sweep(config, &problem, &dir)?,
        CommandKind::TuneGamma => cmd_tune(config, &problem, &dir)?,
        CommandKind::Heatmap => cmd_heatmap(config, &problem, &dir)?,
        CommandKind::Verify => cmd_verify(config, &problem, &dir)?,
        CommandKind::Params => cmd_params(config, &problem, &dir)?,
    };

    let metadata = Metadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: config.command.to_string(),
        config: config.clone(),
        problem_hash: problem_file.hash(),
        problem_params: problem_params_if_available(&problem),
        x_star_residual: reference_equilibrium(&problem).ok().map(|(_, r, _)| r),
        resolved_gammas: resolved_gammas(config, &problem)?,
        seed: config.run.seed,
    };
    dir.write_json("metadata.json", &metadata)?;
    Ok(closing)
}

fn problem_params_if_available(problem: &AnyProblem) -> Option<ProblemParameters> {
    compute_parameters(problem).ok()
}

/// First-round step size per tau under the configured schedule.
fn resolved_gammas(config: &ExperimentConfig, problem: &AnyProblem) -> Result<Vec<(u64, f64)>> {
    let kind = config.run.schedule_kind()?;
    let taus: Vec<u64> = match config.command {
        CommandKind::Run => vec![config.run.tau],
        CommandKind::SweepTau | CommandKind::Heatmap => config.run.taus.clone(),
        CommandKind::TuneGamma => vec![config.run.tau],
        _ => Vec::new(),
    };
    let mut resolved = Vec::new();
    for tau in taus {
        let gamma = match kind {
            ScheduleKind::Constant { gamma } => gamma,
            _ => {
                let params = compute_parameters(problem)?;
                StepSizeSchedule::resolve(kind, &params, tau)
                    .map_err(|e| anyhow!("resolving schedule for tau = {tau}: {e}"))?
                    .gamma(0)
            }
        };
        resolved.push((tau, gamma));
    }
    Ok(resolved)
}

fn sweep_config(config: &ExperimentConfig) -> Result<SweepConfig> {
    Ok(SweepConfig {
        rounds: config.run.rounds,
        schedule: config.run.schedule_kind()?,
        mode: config.run.mode,
        seed: config.run.seed,
        replicates: config.run.replicates,
        divergence_threshold: config.run.divergence_threshold,
        parallel_players: config.run.parallel_players,
    })
}

fn cmd_run(config: &ExperimentConfig, problem: &AnyProblem, dir: &ArtifactDir) -> Result<String> {
    let x0 = config.run.x0.resolve(problem)?;
    let run_config = RunConfig {
        tau: config.run.tau,
        rounds: config.run.rounds,
        schedule: config.run.schedule_kind()?,
        mode: config.run.mode,
        seed: config.run.seed,
        replicate: 0,
        divergence_threshold: config.run.divergence_threshold,
        convergence_tol: config.run.convergence_tol,
        parallel_players: config.run.parallel_players,
    };
    let trajectory = run_pearl_sgd(problem, &x0, &run_config)?;
    let n = problem.layout().n();
    dir.write("trajectory.csv", &csv_string(n, &trajectory.csv_rows()))?;
    let summary = Summary {
        command: config.command.to_string(),
        entries: vec![SummaryEntry {
            tau: config.run.tau,
            gamma: trajectory.gammas.first().copied().unwrap_or(f64::NAN),
            final_rel_error: trajectory.final_rel_error(),
            status: trajectory.status,
        }],
    };
    dir.write_json("summary.json", &summary)?;
    Ok(format!(
        "run finished: status {:?}, final relative error {:.6e} ({} rounds)",
        trajectory.status,
        trajectory.final_rel_error(),
        trajectory.rounds_completed
    ))
}

fn cmd_sweep(config: &ExperimentConfig, problem: &AnyProblem, dir: &ArtifactDir) -> Result<String> {
    let x0 = config.run.x0.resolve(problem)?;
    let sweep = sweep_config(config)?;
    let entries = sweep_tau(problem, &x0, &config.run.taus, &sweep)?;
    let n = problem.layout().n();
    let mut summary_entries = Vec::new();
    for entry in &entries {
        dir.write(&format!("sweep_tau_{}.csv", entry.tau), &csv_string(n, &entry.csv_rows()))?;
        summary_entries.push(SummaryEntry {
            tau: entry.tau,
            gamma: entry
                .runs
                .first()
                .and_then(|t| t.gammas.first().copied())
                .unwrap_or(f64::NAN),
            final_rel_error: entry.final_error,
            status: entry.runs[0].status,
        });
    }
    let summary = Summary { command: config.command.to_string(), entries: summary_entries };
    dir.write_json("summary.json", &summary)?;
    let lines: Vec<String> = entries
        .iter()
        .map(|e| format!("tau = {}: final mean relative error {:.6e}", e.tau, e.final_error))
        .collect();
    Ok(format!("sweep finished over {} intervals\n{}", entries.len(), lines.join("\n")))
}

fn cmd_tune(config: &ExperimentConfig, problem: &AnyProblem, dir: &ArtifactDir) -> Result<String> {
    let x0 = config.run.x0.resolve(problem)?;
    let sweep = sweep_config(config)?;
    let grid = config.run.tune_grid();
    let result = tune_gamma(problem, &x0, config.run.tau, &grid, &sweep)?;
    let n = problem.layout().n();
    dir.write("best_trajectory.csv", &csv_string(n, &result.best_entry.csv_rows()))?;
    let summary = Summary {
        command: config.command.to_string(),
        entries: result
            .grid
            .iter()
            .map(|&(gamma, err)| SummaryEntry {
                tau: config.run.tau,
                gamma,
                final_rel_error: err,
                status: if err.is_infinite() {
                    pearl_core::engine::RunStatus::Diverged
                } else {
                    pearl_core::engine::RunStatus::BudgetExhausted
                },
            })
            .collect(),
    };
    dir.write_json("summary.json", &summary)?;
    Ok(format!(
        "tuned gamma = {:.6e} (final mean relative error {:.6e})",
        result.best_gamma, result.best_entry.final_error
    ))
}

fn cmd_heatmap(config: &ExperimentConfig, problem: &AnyProblem, dir: &ArtifactDir) -> Result<String> {
    let x0 = config.run.x0.resolve(problem)?;
    let sweep = sweep_config(config)?;
    let gammas = config.run.heatmap_grid_gammas();
    let result = heatmap_grid(problem, &x0, &gammas, &config.run.taus, &sweep)?;

    // Matrix CSV: one row per gamma, one column per tau, log10 errors.
    let mut csv = String::from("gamma");
    for tau in &result.taus {
        csv.push_str(&format!(",tau_{tau}"));
    }
    csv.push('\n');
    for (gi, gamma) in result.gammas.iter().enumerate() {
        csv.push_str(&format!("{gamma}"));
        for ti in 0..result.taus.len() {
            let v = result.entries[gi][ti];
            if v.is_infinite() {
                csv.push_str(",inf");
            } else {
                csv.push_str(&format!(",{v}"));
            }
        }
        csv.push('\n');
    }
    dir.write("heatmap.csv", &csv)?;

    let argmins = result.argmin_gamma_per_tau();
    let summary = Summary {
        command: config.command.to_string(),
        entries: result
            .taus
            .iter()
            .zip(&argmins)
            .map(|(&tau, &gamma)| SummaryEntry {
                tau,
                gamma: gamma.unwrap_or(f64::NAN),
                final_rel_error: f64::NAN,
                status: pearl_core::engine::RunStatus::BudgetExhausted,
            })
            .collect(),
    };
    dir.write_json("summary.json", &summary)?;
    Ok(format!(
        "heatmap finished: {} x {} cells; per-tau argmin gamma = {:?}",
        result.gammas.len(),
        result.taus.len(),
        argmins
    ))
}

fn cmd_verify(config: &ExperimentConfig, problem: &AnyProblem, dir: &ArtifactDir) -> Result<String> {
    let v = &config.verify;
    let params = match compute_parameters(problem) {
        Ok(p) => {
            // Fill empirical noise levels where the problem has no exact bound.
            if p.sigma_sq_total == 0.0
                && problem.sigma_bound().is_none()
                && config.run.mode == Mode::Stochastic
            {
                let sigma = estimate_sigma(problem, 50, 2_000, config.run.seed);
                p.with_sigma(sigma)?
            } else {
                p
            }
        }
        Err(e) => bail!("verification needs problem parameters: {e}"),
    };
    let x0 = config.run.x0.resolve(problem)?;

    let mut reports: Vec<BoundReport> = Vec::new();
    match v.suite.as_str() {
        "assumptions" => {
            reports.extend(check_assumptions(
                problem,
                &params,
                v.samples,
                v.radius,
                config.run.seed,
                AssumptionTols::default(),
            ));
            if let AnyProblem::Sine(game) = problem {
                reports.extend(sine_witness_reports(game, v.witness_index));
            }
        }
        "contraction" => {
            let kind = config.run.schedule_kind()?;
            let schedule = StepSizeSchedule::resolve(kind, &params, config.run.tau)?;
            let gamma = schedule.gamma(0);
            let run_config = RunConfig {
                tau: config.run.tau,
                rounds: config.run.rounds,
                schedule: ScheduleKind::Constant { gamma },
                mode: Mode::Deterministic,
                seed: config.run.seed,
                replicate: 0,
                divergence_threshold: config.run.divergence_threshold,
                convergence_tol: None,
                parallel_players: config.run.parallel_players,
            };
            let trajectory = run_pearl_sgd(problem, &x0, &run_config)?;
            reports.push(check_contraction(&trajectory, &params, gamma, config.run.tau, 1e-9));
        }
        "neighborhood" => {
            let kind = config.run.schedule_kind()?;
            let gamma = StepSizeSchedule::resolve(kind, &params, config.run.tau)?.gamma(0);
            reports.push(check_neighborhood(
                problem,
                &x0,
                &params,
                gamma,
                config.run.tau,
                config.run.rounds,
                v.mc_seeds,
                config.run.seed,
            ));
        }
        "lemmas" => {
            for player in 0..problem.layout().n() {
                let l_i = params.l_per_player[player];
                let tau = config.run.tau;
                let gamma = if tau > 1 { 1.0 / (l_i * (tau - 1) as f64) } else { 1.0 / l_i };
                reports.push(check_gradnorm_drift(
                    problem,
                    player,
                    &x0,
                    &params,
                    gamma,
                    tau,
                    v.chains,
                    config.run.seed,
                ));
                reports.push(check_local_error(
                    problem,
                    player,
                    &x0,
                    &params,
                    gamma,
                    tau,
                    v.chains,
                    config.run.seed,
                ));
            }
        }
        "decreasing" => {
            let check = check_decreasing_rate(
                problem,
                &x0,
                &params,
                config.run.tau,
                &v.t_grid,
                v.mc_seeds,
                config.run.seed,
            );
            reports.extend(check.reports);
        }
        other => bail!(
            "unknown verify suite '{other}' (expected assumptions, contraction, \
             neighborhood, lemmas, or decreasing)"
        ),
    }

    dir.write_json("reports.json", &reports)?;
    let mut lines = Vec::new();
    for r in &reports {
        lines.push(r.summary_line());
    }
    let failed = reports.iter().filter(|r| r.verdict == pearl_core::verify::Verdict::Fail).count();
    lines.push(format!("{} checks, {} failed", reports.len(), failed));
    Ok(lines.join("\n"))
}

fn cmd_params(config: &ExperimentConfig, problem: &AnyProblem, dir: &ArtifactDir) -> Result<String> {
    let params = compute_parameters(problem)?;
    dir.write_json("params.json", &params)?;
    let text = serde_json::to_string_pretty(&params)?;
    let _ = config;
    Ok(text)
}

/// Re-executes the configuration stored in `original` into `out` and checks
/// that the scientific artifact content reproduces exactly.
pub fn replay(original: &Path, out: &Path) -> Result<String> {
    let config_path = original.join("config.toml");
    let text = std::fs::read_to_string(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let config = ExperimentConfig::from_toml(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let closing = execute(&config, out)?;
    let mismatches = compare_artifacts(original, out)?;
    if mismatches.is_empty() {
        Ok(format!("{closing}\nreplay verified: artifacts reproduce exactly"))
    } else {
        bail!("replay mismatch:\n{}", mismatches.join("\n"))
    }
}

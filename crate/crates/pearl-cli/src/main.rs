//! `pearl` - driver for per-player local SGD experiments on n-player games.
//!
//! Subcommands generate or load a game instance, run synchronized local-SGD
//! experiments (single runs, tau sweeps, step-size tuning, heatmaps), verify
//! the convergence bounds numerically, and write plot-ready CSV artifacts
//! with a replayable configuration sidecar.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{CommandKind, ExperimentConfig, ProblemSpec, RunSection, VerifySection, X0Spec};
use pearl_core::engine::Mode;

#[derive(Parser)]
#[command(name = "pearl", version, about = "Per-player local SGD for n-player games")]
struct Cli {
    /// Load defaults from a TOML config file (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts (default runs/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads for replicates and sweep members.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run at a fixed synchronization interval.
    Run(RunCmd),
    /// Sweep over synchronization intervals with a shared schedule.
    SweepTau(CommonCmd),
    /// Pick the best constant step size from a grid at fixed tau.
    TuneGamma(CommonCmd),
    /// Final-error grid over (gamma, tau) pairs.
    Heatmap(CommonCmd),
    /// Numerical verification suites (assumptions, bounds, local lemmas).
    Verify(VerifyCmd),
    /// Print the measured problem constants.
    Params(CommonCmd),
    /// Preset: the five-robot formation control benchmark sweep.
    Robot(RobotCmd),
}

#[derive(Args, Default)]
struct ProblemArgs {
    /// Problem kind: quad-minimax | nplayer-quadratic | robot-control | sine-game.
    #[arg(long)]
    problem: Option<String>,
    /// Load the problem from a problem JSON file instead of generating it.
    #[arg(long)]
    problem_file: Option<PathBuf>,
    /// Per-player dimension of generated quadratic games.
    #[arg(long)]
    d: Option<usize>,
    /// Number of summands in the finite-sum objectives.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Player count of the n-player quadratic game.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu_a: Option<f64>,
    #[arg(long)]
    l_a: Option<f64>,
    #[arg(long)]
    l_b: Option<f64>,
    #[arg(long)]
    mu_c: Option<f64>,
    #[arg(long)]
    l_c: Option<f64>,
    /// Generator seed (distinct from the run seed).
    #[arg(long)]
    problem_seed: Option<u64>,
    /// Mini-batch size of the finite-sum oracles.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Gradient noise variance of the robot benchmark.
    #[arg(long)]
    noise_variance: Option<f64>,
    /// Sine-game moduli.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
}

#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    tau: Option<u64>,
    /// Comma-separated tau list for sweeps/heatmaps.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<u64>>,
    #[arg(long)]
    rounds: Option<u64>,
    /// theoretical | theoretical-robot | constant | horizon | decreasing.
    #[arg(long)]
    schedule: Option<String>,
    /// Step size for the constant schedule.
    #[arg(long)]
    gamma: Option<f64>,
    /// Iteration budget for the horizon schedule.
    #[arg(long)]
    total_iters: Option<u64>,
    /// deterministic | stochastic.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Comma-separated step-size grid for tune-gamma / heatmap.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    divergence_threshold: Option<f64>,
    #[arg(long)]
    convergence_tol: Option<f64>,
    /// Starting point: "ones", "zeros", or a comma-separated vector.
    #[arg(long)]
    x0: Option<String>,
    /// Run the players' local phases on the thread pool.
    #[arg(long)]
    parallel_players: bool,
}

#[derive(Args)]
struct RunCmd {
    /// Re-execute the experiment recorded in this artifact directory and
    /// verify the outputs reproduce.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct CommonCmd {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct VerifyCmd {
    /// assumptions | contraction | neighborhood | lemmas | decreasing.
    #[arg(long)]
    suite: Option<String>,
    /// Sample count for the assumption checks.
    #[arg(long)]
    samples: Option<usize>,
    /// Sampling-ball radius around the equilibrium.
    #[arg(long)]
    radius: Option<f64>,
    /// Monte Carlo chain count for the local lemma checks.
    #[arg(long)]
    chains: Option<u64>,
    /// Replicate count for Monte Carlo bound checks.
    #[arg(long)]
    mc_seeds: Option<u64>,
    /// Comma-separated iteration budgets for the decreasing-rate suite.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<u64>>,
    /// Witness family index for the sine game.
    #[arg(long)]
    witness_index: Option<u32>,
    /// Exit nonzero if any check fails.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RobotCmd {
    /// Print the preset configuration as TOML and exit without running.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    run: RunArgs,
}

fn parse_mode(text: &str) -> Result<Mode> {
    match text {
        "deterministic" => Ok(Mode::Deterministic),
        "stochastic" => Ok(Mode::Stochastic),
        other => bail!("unknown mode '{other}' (expected deterministic or stochastic)"),
    }
}

fn parse_x0(text: &str) -> Result<X0Spec> {
    match text {
        "ones" | "zeros" => Ok(X0Spec::Named(text.into())),
        list => {
            let values: Result<Vec<f64>, _> =
                list.split(',').map(|v| v.trim().parse::<f64>()).collect();
            Ok(X0Spec::Values(values.with_context(|| format!("parsing x0 vector '{list}'"))?))
        }
    }
}

/// Base config: the file given with `--config`, or defaults.
fn base_config(cli_config: &Option<PathBuf>, command: CommandKind) -> Result<ExperimentConfig> {
    let mut config = match cli_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            ExperimentConfig::from_toml(&text)
                .with_context(|| format!("in config file {}", path.display()))?
        }
        None => ExperimentConfig {
            command,
            problem: default_problem_spec(),
            run: RunSection::default(),
            verify: VerifySection::default(),
        },
    };
    config.command = command;
    Ok(config)
}

fn default_problem_spec() -> ProblemSpec {
    ProblemSpec::QuadMinimax {
        d: 10,
        m: 100,
        mu_a: 1.0,
        l_a: 2.0,
        l_b: 15.0,
        mu_c: 1.0,
        l_c: 2.0,
        seed: 7,
        batch_size: 1,
    }
}

fn apply_problem_args(config: &mut ExperimentConfig, args: &ProblemArgs) -> Result<()> {
    if let Some(path) = &args.problem_file {
        config.problem = ProblemSpec::File { path: path.clone() };
        return Ok(());
    }
    if let Some(kind) = &args.problem {
        config.problem = match kind.as_str() {
            "quad-minimax" => default_problem_spec(),
            "nplayer-quadratic" => ProblemSpec::NplayerQuadratic {
                n: 5,
                d: 10,
                m: 100,
                mu_a: 1.0,
                l_a: 2.0,
                l_b: 5.0,
                seed: 7,
                batch_size: 1,
            },
            "robot-control" => ProblemSpec::RobotControl { noise_variance: 100.0 },
            "sine-game" => ProblemSpec::SineGame { mu: 1.0, ell: 4.0 },
            other => bail!(
                "unknown problem '{other}' (expected quad-minimax, nplayer-quadratic, \
                 robot-control, or sine-game)"
            ),
        };
    }
    // Generator parameter overrides must match the selected kind.
    let reject = |flag: &str, kind: &str| -> Result<()> {
        bail!("flag --{flag} does not apply to problem kind '{kind}'")
    };
    match &mut config.problem {
        ProblemSpec::QuadMinimax { d, m, mu_a, l_a, l_b, mu_c, l_c, seed, batch_size } => {
            if let Some(v) = args.d {
                *d = v;
            }
            if let Some(v) = args.m {
                *m = v;
            }
            if args.n.is_some() {
                return reject("n", "quad-minimax");
            }
            if let Some(v) = args.mu_a {
                *mu_a = v;
            }
            if let Some(v) = args.l_a {
                *l_a = v;
            }
            if let Some(v) = args.l_b {
                *l_b = v;
            }
            if let Some(v) = args.mu_c {
                *mu_c = v;
            }
            if let Some(v) = args.l_c {
                *l_c = v;
            }
            if let Some(v) = args.problem_seed {
                *seed = v;
            }
            if let Some(v) = args.batch_size {
                *batch_size = v;
            }
            if args.noise_variance.is_some() {
                return reject("noise-variance", "quad-minimax");
            }
            if args.mu.is_some() || args.ell.is_some() {
                return reject("mu/--ell", "quad-minimax");
            }
        }
        ProblemSpec::NplayerQuadratic { n, d, m, mu_a, l_a, l_b, seed, batch_size } => {
            if let Some(v) = args.n {
                *n = v;
            }
            if let Some(v) = args.d {
                *d = v;
            }
            if let Some(v) = args.m {
                *m = v;
            }
            if let Some(v) = args.mu_a {
                *mu_a = v;
            }
            if let Some(v) = args.l_a {
                *l_a = v;
            }
            if let Some(v) = args.l_b {
                *l_b = v;
            }
            if let Some(v) = args.problem_seed {
                *seed = v;
            }
            if let Some(v) = args.batch_size {
                *batch_size = v;
            }
            if args.mu_c.is_some() || args.l_c.is_some() {
                return reject("mu-c/--l-c", "nplayer-quadratic");
            }
            if args.noise_variance.is_some() {
                return reject("noise-variance", "nplayer-quadratic");
            }
            if args.mu.is_some() || args.ell.is_some() {
                return reject("mu/--ell", "nplayer-quadratic");
            }
        }
        ProblemSpec::RobotControl { noise_variance } => {
            if let Some(v) = args.noise_variance {
                *noise_variance = v;
            }
            if args.d.is_some() || args.m.is_some() || args.n.is_some() {
                return reject("d/--M/--n", "robot-control");
            }
        }
        ProblemSpec::SineGame { mu, ell } => {
            if let Some(v) = args.mu {
                *mu = v;
            }
            if let Some(v) = args.ell {
                *ell = v;
            }
            if args.d.is_some() || args.m.is_some() {
                return reject("d/--M", "sine-game");
            }
        }
        ProblemSpec::File { .. } => {
            if args.d.is_some() || args.m.is_some() || args.n.is_some() {
                bail!("generator flags do not apply when loading a problem file");
            }
        }
    }
    Ok(())
}

fn apply_run_args(config: &mut ExperimentConfig, args: &RunArgs) -> Result<()> {
    let run = &mut config.run;
    if let Some(v) = args.tau {
        run.tau = v;
    }
    if let Some(v) = &args.taus {
        run.taus = v.clone();
    }
    if let Some(v) = args.rounds {
        run.rounds = v;
    }
    if let Some(v) = &args.schedule {
        run.schedule = v.clone();
    }
    if let Some(v) = args.gamma {
        run.gamma = Some(v);
    }
    if let Some(v) = args.total_iters {
        run.total_iters = Some(v);
    }
    if let Some(v) = &args.mode {
        run.mode = parse_mode(v)?;
    }
    if let Some(v) = args.seed {
        run.seed = v;
    }
    if let Some(v) = args.replicates {
        run.replicates = v;
    }
    if let Some(v) = &args.gammas {
        run.gammas = v.clone();
    }
    if let Some(v) = args.divergence_threshold {
        run.divergence_threshold = v;
    }
    if let Some(v) = args.convergence_tol {
        run.convergence_tol = Some(v);
    }
    if let Some(v) = &args.x0 {
        run.x0 = parse_x0(v)?;
    }
    if args.parallel_players {
        run.parallel_players = true;
    }
    Ok(())
}

fn apply_verify_args(config: &mut ExperimentConfig, args: &VerifyCmd) -> Result<()> {
    let v = &mut config.verify;
    if let Some(s) = &args.suite {
        v.suite = s.clone();
    }
    if let Some(s) = args.samples {
        v.samples = s;
    }
    if let Some(r) = args.radius {
        v.radius = r;
    }
    if let Some(c) = args.chains {
        v.chains = c;
    }
    if let Some(m) = args.mc_seeds {
        v.mc_seeds = m;
    }
    if let Some(t) = &args.t_grid {
        v.t_grid = t.clone();
    }
    if let Some(w) = args.witness_index {
        v.witness_index = w;
    }
    Ok(())
}

/// The `PEARL_SEED` environment variable wins over flags and config files.
fn apply_env_seed(config: &mut ExperimentConfig) -> Result<()> {
    if let Ok(text) = std::env::var("PEARL_SEED") {
        let seed: u64 = text
            .parse()
            .map_err(|_| anyhow!("PEARL_SEED must be an unsigned integer, got '{text}'"))?;
        config.run.seed = seed;
    }
    Ok(())
}

/// The exact five-robot benchmark configuration: the fixed constants with
/// Gaussian gradient noise of variance 100, the standard tau list, and the
/// reduced-margin theoretical step size.
fn robot_preset() -> ExperimentConfig {
    let mut run = RunSection::default();
    run.taus = config::DEFAULT_TAUS.to_vec();
    run.tau = 5;
    run.schedule = "theoretical-robot".into();
    run.mode = Mode::Stochastic;
    run.replicates = 5;
    ExperimentConfig {
        command: CommandKind::SweepTau,
        problem: ProblemSpec::RobotControl { noise_variance: 100.0 },
        run,
        verify: VerifySection::default(),
    }
}

fn run_cli(cli: Cli) -> Result<String> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("configuring the worker pool")?;
    }

    let (config, out, strict) = match &cli.command {
        Command::Run(cmd) => {
            if let Some(replay_dir) = &cmd.replay {
                let out = cli.out.clone().unwrap_or_else(|| replay_dir.join("replay"));
                return commands::replay(replay_dir, &out);
            }
            let mut config = base_config(&cli.config, CommandKind::Run)?;
            apply_problem_args(&mut config, &cmd.problem)?;
            apply_run_args(&mut config, &cmd.run)?;
            apply_env_seed(&mut config)?;
            (config, cli.out.clone(), false)
        }
        Command::SweepTau(cmd) => {
            let mut config = base_config(&cli.config, CommandKind::SweepTau)?;
            apply_problem_args(&mut config, &cmd.problem)?;
            apply_run_args(&mut config, &cmd.run)?;
            apply_env_seed(&mut config)?;
            (config, cli.out.clone(), false)
        }
        Command::TuneGamma(cmd) => {
            let mut config = base_config(&cli.config, CommandKind::TuneGamma)?;
            apply_problem_args(&mut config, &cmd.problem)?;
            apply_run_args(&mut config, &cmd.run)?;
            apply_env_seed(&mut config)?;
            (config, cli.out.clone(), false)
        }
        Command::Heatmap(cmd) => {
            let mut config = base_config(&cli.config, CommandKind::Heatmap)?;
            apply_problem_args(&mut config, &cmd.problem)?;
            apply_run_args(&mut config, &cmd.run)?;
            apply_env_seed(&mut config)?;
            (config, cli.out.clone(), false)
        }
        Command::Verify(cmd) => {
            let mut config = base_config(&cli.config, CommandKind::Verify)?;
            apply_problem_args(&mut config, &cmd.problem)?;
            apply_run_args(&mut config, &cmd.run)?;
            apply_verify_args(&mut config, cmd)?;
            apply_env_seed(&mut config)?;
            (config, cli.out.clone(), cmd.strict)
        }
        Command::Params(cmd) => {
            let mut config = base_config(&cli.config, CommandKind::Params)?;
            apply_problem_args(&mut config, &cmd.problem)?;
            apply_run_args(&mut config, &cmd.run)?;
            (config, cli.out.clone(), false)
        }
        Command::Robot(cmd) => {
            let mut config = robot_preset();
            apply_run_args(&mut config, &cmd.run)?;
            apply_env_seed(&mut config)?;
            if cmd.print_config {
                return Ok(config.to_toml());
            }
            (config, cli.out.clone(), false)
        }
    };

    config.run.validate()?;
    let out = out.unwrap_or_else(|| PathBuf::from("runs").join(config.command.to_string()));
    let closing = commands::execute(&config, &out)?;
    if strict && closing.contains("FAIL") {
        bail!("{closing}\nstrict mode: at least one check failed");
    }
    Ok(format!("{closing}\nartifacts: {}", out.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(cli) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

//! Subcommands of the `pedagogy` binary.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when a
//! trained tutor fails the goal-2 convergence check, 1 for anything else
//! (I/O failures and the like).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pedagogy::experiment::{
    demo_rng, grid_experiment, train_run_tutor, Condition, GridResults, MetricsSeries,
};
use pedagogy::report::{
    read_metrics_csv, render_learning_curves, render_policy_bars, run_csv_name, summarize,
    write_metrics_csv, write_policy_csv, write_run_csv, Metric,
};
use pedagogy::tutor::demonstrate;
use pedagogy::{load_config, AppConfig, BallColor, Goal, Trajectory, TutorMode};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pedagogy",
    version,
    about = "Pedagogical tutors and pragmatic learners"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one tutor and write its policy as CSV and SVG.
    TrainTutor(TrainTutorArgs),
    /// Run every tutor/learner pairing over several seeds.
    RunGrid(RunGridArgs),
    /// Redraw the learning curves from a metrics CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config file. Flags given on the command line take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Naive,
    Pedagogical,
}

impl From<ModeArg> for TutorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => TutorMode::Naive,
            ModeArg::Pedagogical => TutorMode::Pedagogical,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainTutorArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tutor training episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunGridArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Number of seeds; runs use seeds 0..N.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Learner training episodes per run.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics CSV written by `run-grid`.
    #[arg(long, value_name = "PATH")]
    pub metrics: PathBuf,
    /// Where to put the SVGs. Defaults to the metrics file's directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            error: error.into(),
        }
    }
}

impl From<pedagogy::Error> for Failure {
    fn from(error: pedagogy::Error) -> Self {
        anyhow::Error::from(error).into()
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error,
        }
    }
}

/// Runs a parsed command line. Returns the exit code on success paths,
/// which is 0 or [`EXIT_NOT_CONVERGED`].
pub fn run(cli: &Cli, out: &mut impl Write) -> Result<u8, Failure> {
    match &cli.command {
        Command::TrainTutor(args) => cmd_train_tutor(args, out),
        Command::RunGrid(args) => cmd_run_grid(args, out),
        Command::Report(args) => cmd_report(args, out),
    }
}

fn base_config(common: &ConfigArgs) -> Result<AppConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)
            .with_context(|| format!("cannot load config {}", path.display()))
            .map_err(Failure::config)?,
        None => AppConfig::default(),
    };
    if let Some(dir) = &common.out {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn cmd_train_tutor(args: &TrainTutorArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let mut cfg = base_config(&args.common)?;
    if let Some(mode) = args.mode {
        cfg.tutor.mode = mode.into();
    }
    if let Some(n) = args.episodes {
        cfg.tutor.episodes = n;
    }
    cfg.validate().map_err(Failure::config)?;

    let mode = cfg.tutor.mode;
    let policy =
        train_run_tutor(&cfg.settings(), mode, args.seed).context("tutor training failed")?;

    create_dir(&cfg.output_dir)?;
    let stem = format!("tutor_{mode}_seed{}", args.seed);
    let meta = [
        ("mode", mode.to_string()),
        ("seed", args.seed.to_string()),
        ("episodes", cfg.tutor.episodes.to_string()),
        ("lambda_ped", format!("{:.6}", cfg.tutor.lambda_ped)),
    ];
    write_policy_csv(&policy, &meta, &cfg.output_dir.join(format!("{stem}.csv")))?;
    render_policy_bars(
        &policy,
        Goal::Goal1,
        &cfg.output_dir.join(format!("{stem}.svg")),
    )?;

    let mut rng = demo_rng(args.seed);
    for g in Goal::ALL {
        let t = demonstrate(&policy, g, cfg.tutor.demo_selection, &mut rng).trajectory;
        writeln!(out, "{g}: {t}  p={:.6}", policy.trajectory_prob(g, t)).context("stdout")?;
    }
    let expected = Trajectory::new(BallColor::Orange, BallColor::Pink);
    let got = policy.greedy_trajectory(Goal::Goal2);
    if got != expected {
        log::warn!(
            "goal 2 demonstration is {got}, expected {expected}; the tutor has not converged"
        );
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

pub fn cmd_run_grid(args: &RunGridArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let mut cfg = base_config(&args.common)?;
    let exp = &mut cfg.experiment;
    if let Some(n) = args.seeds {
        exp.seeds = n;
    }
    if let Some(n) = args.episodes {
        exp.episodes = n;
        if exp.eval_period > n {
            log::info!(
                "eval_period {} exceeds {n} episodes, evaluating at the end only",
                exp.eval_period
            );
            exp.eval_period = n.max(1);
        }
    }
    if let Some(n) = args.parallel {
        exp.parallel = n;
    }
    cfg.validate().map_err(Failure::config)?;

    let settings = cfg.settings();
    let grid = grid_experiment(
        &settings,
        &cfg.experiment.seed_list(),
        cfg.experiment.parallel,
    )
    .context("grid experiment failed")?;

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    for ((condition, seed), run) in &grid.runs {
        write_run_csv(&run.records, &dir.join(run_csv_name(*condition, *seed)))?;
    }
    write_metrics_csv(grid.all_series(), &dir.join("metrics.csv"))?;
    render_learning_curves(
        grid.all_series(),
        Metric::Predictability,
        &dir.join("predictability.svg"),
    )?;
    render_learning_curves(
        grid.all_series(),
        Metric::Reachability,
        &dir.join("reachability.svg"),
    )?;

    print_summary(&grid, out)?;
    Ok(0)
}

pub fn cmd_report(args: &ReportArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let series = read_metrics_csv(&args.metrics)
        .with_context(|| format!("cannot read {}", args.metrics.display()))
        .map_err(Failure::config)?;
    if series.is_empty() {
        return Err(Failure::config(anyhow::anyhow!(
            "{} has no data rows",
            args.metrics.display()
        )));
    }
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .metrics
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        create_dir(&dir)?;
    }
    render_learning_curves(
        &series,
        Metric::Predictability,
        &dir.join("predictability.svg"),
    )?;
    render_learning_curves(&series, Metric::Reachability, &dir.join("reachability.svg"))?;
    write_summary(&series, out)?;
    Ok(0)
}

fn print_summary(grid: &GridResults, out: &mut impl Write) -> anyhow::Result<()> {
    let series: Vec<MetricsSeries> = grid.all_series().cloned().collect();
    write_summary(&series, out)
}

/// Mean and population std of the last evaluation point, per condition.
fn write_summary(series: &[MetricsSeries], out: &mut impl Write) -> anyhow::Result<()> {
    writeln!(
        out,
        "{:<24} {:>5} {:>22} {:>22}",
        "condition", "seeds", "final predictability", "final reachability"
    )?;
    for cond in Condition::ALL {
        let runs: Vec<&MetricsSeries> = series.iter().filter(|s| s.condition == cond).collect();
        if runs.is_empty() {
            continue;
        }
        let cell = |m| -> anyhow::Result<String> {
            let s = summarize(&runs, m)?;
            let k = s.mean.len() - 1;
            Ok(format!("{:.6} ± {:.6}", s.mean[k], s.std[k]))
        };
        writeln!(
            out,
            "{:<24} {:>5} {:>22} {:>22}",
            cond.to_string(),
            runs.len(),
            cell(Metric::Predictability)?,
            cell(Metric::Reachability)?
        )?;
    }
    Ok(())
}

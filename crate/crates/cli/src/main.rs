//! `dilemma`: run curriculum experiments and Stag Hunt pilots, then validate,
//! analyze and export the resulting trial logs.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 I/O error, 4 missing or rejected API key.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dilemma_core::curriculum::{ConditionName, CurriculumError};
use dilemma_core::gateway::UreqTransport;
use dilemma_core::orchestrator::{
    analyze_trials, load_trials, run_experiment, run_pilot, validate_dir, write_analysis, write_trial_exports, BatchSummary,
    ExperimentConfig, Grouping, LessonSource, OrchestratorError, PilotSpec, RunMode, DEFAULT_PILOT_ROUNDS, DEFAULT_TRIALS,
};

const MAX_LISTED_VIOLATIONS: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "dilemma", version, about = "Multi-agent social dilemma experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run curriculum conditions and write one JSONL file per trial plus a summary.
    Run(RunArgs),
    /// Run the four-player Stag Hunt pilot, with or without a one-word communication phase.
    Pilot(PilotArgs),
    /// Compute condition statistics, trajectories and word counts from a run directory.
    Analyze(AnalyzeArgs),
    /// Check every trial file against the event schema and recompute all payoffs.
    Validate(ValidateArgs),
    /// Write per-trial CSVs for plotting individual runs.
    Export(AnalyzeArgs),
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct ModeArgs {
    /// Answer every model call from offline mocks.
    #[arg(long)]
    mock: bool,
    /// Call the configured model endpoints; keys are read from their environment variables.
    #[arg(long)]
    live: bool,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment configuration (pool, endpoints, defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; required for the scrambled condition.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent trials (defaults to the CPU count).
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    mode: ModeArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Condition to run; repeat for several. All four when omitted.
    #[arg(long = "condition", value_parser = parse_condition)]
    conditions: Vec<ConditionName>,
    /// Trials per condition.
    #[arg(long)]
    trials: Option<usize>,
    /// Use deterministic stub lessons instead of the lesson model.
    #[arg(long)]
    stub_lessons: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GroupingArg {
    Hetero,
    Coalition,
}

#[derive(Args, Debug)]
#[group(id = "comm-choice", required = true, multiple = false, args = ["comm", "no_comm"])]
struct PilotArgs {
    /// Add a one-word communication phase before each action.
    #[arg(long)]
    comm: bool,
    /// Plain Stag Hunt.
    #[arg(long)]
    no_comm: bool,
    #[arg(long, value_enum, default_value = "hetero")]
    grouping: GroupingArg,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_PILOT_ROUNDS)]
    rounds: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Run directory (containing `trials/`) or a directory of trial files.
    #[arg(long = "in")]
    input: PathBuf,
    /// Where to write the CSVs; `<in>/analysis` by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

fn parse_condition(s: &str) -> Result<ConditionName, String> {
    s.parse::<ConditionName>().map_err(|e| e.to_string())
}

/// An error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<OrchestratorError> for Failure {
    fn from(e: OrchestratorError) -> Self {
        let code = match &e {
            OrchestratorError::Io(_) => 3,
            OrchestratorError::Gateway(g) if g.is_auth() => 4,
            OrchestratorError::InvalidLog(_) => 1,
            _ => 2,
        };
        let message = match &e {
            OrchestratorError::Curriculum(CurriculumError::MissingSeed) => {
                "the scrambled condition needs a seed: pass --seed or set master_seed in the config".to_string()
            }
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::new(2, format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if common.seed.is_some() {
        config.master_seed = common.seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if common.jobs.is_some() {
        config.parallelism = common.jobs;
    }
    if common.mode.live {
        config.mode = RunMode::Live;
    } else if common.mode.mock {
        config.mode = RunMode::Mock;
    }
    Ok(config)
}

fn print_summary(summary: &BatchSummary, out: &Path) {
    for c in &summary.conditions {
        println!("{}: {} completed, {} aborted", c.condition, c.completed, c.aborted);
        for a in &c.aborted_trials {
            println!("  {} aborted in stage {} round {}: {}", a.trial_id, a.stage, a.round, a.reason);
        }
    }
    println!("wrote {} trial files and {}", summary.trial_files.len(), out.join("summary.json").display());
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut config = load_config(&args.common)?;
    if !args.conditions.is_empty() {
        config.conditions = args.conditions;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if args.stub_lessons {
        config.lesson_source = LessonSource::Stub;
    }
    config.validate()?;
    let summary = run_experiment(&config, Arc::new(UreqTransport))?;
    print_summary(&summary, &config.out_dir);
    Ok(())
}

fn cmd_pilot(args: PilotArgs) -> Result<(), Failure> {
    let config = load_config(&args.common)?;
    let pilot = PilotSpec {
        comm: args.comm,
        grouping: match args.grouping {
            GroupingArg::Hetero => Grouping::Heterogeneous,
            GroupingArg::Coalition => Grouping::Coalition,
        },
        trials: args.trials,
        rounds: args.rounds,
    };
    let summary = run_pilot(&config, &pilot, Arc::new(UreqTransport))?;
    print_summary(&summary, &config.out_dir);
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let trials = load_trials(&args.input)?;
    let report = analyze_trials(&trials)?;
    let out = args.out.unwrap_or_else(|| args.input.join("analysis"));
    let files = write_analysis(&report, &out)?;
    println!("{:<20} {:>4} {:>7} {:>8} {:>8} {:>8} {:>9}", "condition", "n", "aborted", "mean", "std", "ci95", "vs ctrl");
    for (s, c) in report.condition_stats.iter().zip(report.counts.iter().filter(|c| c.n_completed > 0)) {
        let opt = |v: Option<f64>, d: usize| v.map_or("-".to_string(), |x| format!("{x:.d$}"));
        println!(
            "{:<20} {:>4} {:>7} {:>8.1} {:>8} {:>8} {:>9}",
            s.condition,
            s.n_completed,
            c.n_aborted,
            s.mean_payoff,
            opt(s.std_payoff, 1),
            opt(s.ci95_half_width, 2),
            s.pct_vs_control.map_or("-".to_string(), |p| format!("{p:.1}%"))
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let report = validate_dir(&args.input)?;
    if report.files_checked == 0 {
        return Err(Failure::new(1, format!("no trial files under {}", args.input.display())));
    }
    if report.is_ok() {
        println!("ok: {} trial files", report.files_checked);
        return Ok(());
    }
    for v in report.violations.iter().take(MAX_LISTED_VIOLATIONS) {
        eprintln!("{v}");
    }
    let extra = report.violations.len().saturating_sub(MAX_LISTED_VIOLATIONS);
    if extra > 0 {
        eprintln!("... and {extra} more");
    }
    Err(Failure::new(
        1,
        format!("{} violations in {} trial files", report.violations.len(), report.files_checked),
    ))
}

fn cmd_export(args: AnalyzeArgs) -> Result<(), Failure> {
    let trials = load_trials(&args.input)?;
    let out = args.out.unwrap_or_else(|| args.input.join("analysis"));
    for f in write_trial_exports(&trials, &out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Pilot(a) => cmd_pilot(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

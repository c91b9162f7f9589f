use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};

use persist_eval::commands::{self, ScoreArgs};
use persist_eval::config::{parse_measures, JobConfig, Overrides, DEFAULT_MEASURES};
use persist_eval::{CliError, CliResult, ExitStatus, OutputSet};
use persist_eval_core::report::{SeriesMode, DEFAULT_ER_EXCLUSION};
use persist_eval_core::Diagnostics;

/// Default output directory when neither a flag nor the job file names one.
const OUTPUT_ENV: &str = "PERSIST_EVAL_OUTPUT";

#[derive(Debug, Parser)]
#[command(
    name = "persist-eval",
    version,
    about = "Result persistence across evolving test collections"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-topic scores and ARP of one run against one qrels file.
    Score(ScoreCmd),
    /// Persistence cells and report files for a job file.
    Persist(PersistCmd),
    /// Added/removed/changed/unchanged counts between two corpus snapshots.
    CorpusDiff(CorpusDiffCmd),
    /// Re-render table and scatter files from a cells.json.
    Report(ReportCmd),
}

#[derive(Debug, Args)]
struct ScoreCmd {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MEASURES.join(","))]
    measures: String,
    /// Topic list restricting the evaluation.
    #[arg(long)]
    topics: Option<PathBuf>,
    /// Environment label recorded with the scores.
    #[arg(long, default_value = "EE")]
    ee: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PersistCmd {
    /// JSON job file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    measures: Option<String>,
    #[arg(long)]
    pivot: Option<String>,
    /// Comma-separated BASE:TARGET pairs.
    #[arg(long)]
    pairs: Option<String>,
    /// student or welch.
    #[arg(long = "t-test")]
    t_test: Option<String>,
    /// Flag scatter points whose |ER| exceeds this value.
    #[arg(long = "er-exclude")]
    er_exclude: Option<f64>,
    /// Evaluate every environment on the core topics (default).
    #[arg(long = "strict-topics", overrides_with = "no_strict_topics")]
    strict_topics: bool,
    /// Evaluate each environment on its own topics.
    #[arg(long = "no-strict-topics")]
    no_strict_topics: bool,
    /// What the per-topic series plot.
    #[arg(long, value_enum)]
    series: Option<SeriesArg>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SeriesArg {
    CrossEe,
    PivotDelta,
}

#[derive(Debug, Args)]
struct CorpusDiffCmd {
    a: PathBuf,
    b: PathBuf,
    /// Treat A and B as directories of documents instead of manifests.
    #[arg(long)]
    from_dirs: bool,
    /// Also write the summary files into this directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportCmd {
    #[arg(long)]
    cells: PathBuf,
    #[arg(long = "er-exclude", default_value_t = DEFAULT_ER_EXCLUSION)]
    er_exclude: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn output_dir(flag: Option<PathBuf>, fallback: Option<PathBuf>) -> PathBuf {
    flag.or(fallback)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write(outputs: &OutputSet, dir: &Path) -> CliResult<()> {
    outputs.write_to(dir)?;
    for p in outputs.paths() {
        log::info!("wrote {}", dir.join(p).display());
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let mut diag = Diagnostics::new();
    match cli.command {
        Command::Score(cmd) => {
            let args = ScoreArgs {
                run: cmd.run,
                qrels: cmd.qrels,
                measures: parse_measures(&cmd.measures)?,
                topics: cmd.topics,
                ee: cmd.ee,
            };
            if args.measures.is_empty() {
                return Err(CliError::usage("no measures requested"));
            }
            let outputs = commands::score(&args, &mut diag)?;
            write(&outputs, &output_dir(cmd.output, None))
        }
        Command::Persist(cmd) => {
            let (config, base_dir) = JobConfig::load(&cmd.config)?;
            let overrides = Overrides {
                measures: cmd.measures,
                pivot: cmd.pivot,
                pairs: cmd.pairs,
                t_test: cmd.t_test,
                er_exclude: cmd.er_exclude,
                strict_topics: match (cmd.strict_topics, cmd.no_strict_topics) {
                    (true, _) => Some(true),
                    (false, true) => Some(false),
                    _ => None,
                },
                series: cmd.series.map(|s| match s {
                    SeriesArg::CrossEe => SeriesMode::CrossEe,
                    SeriesArg::PivotDelta => SeriesMode::PivotDelta,
                }),
                output: cmd.output,
            };
            let job = config.resolve(&base_dir, &overrides)?;
            let outcome = commands::persist(&job, &mut diag)?;
            write(&outcome.outputs, &output_dir(None, job.output.clone()))
        }
        Command::CorpusDiff(cmd) => {
            let summary = commands::corpus_diff(&cmd.a, &cmd.b, cmd.from_dirs)?;
            print!("{}", summary.to_text(cli.verbose));
            match cmd.output {
                Some(dir) => write(&commands::corpus_diff_outputs(&summary, cli.verbose), &dir),
                None => Ok(()),
            }
        }
        Command::Report(cmd) => {
            if !(cmd.er_exclude.is_finite() && cmd.er_exclude > 0.0) {
                return Err(CliError::usage("--er-exclude must be a positive number"));
            }
            let outputs = commands::report(&cmd.cells, cmd.er_exclude)?;
            write(&outputs, &output_dir(cmd.output, None))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(ExitStatus::Usage as u8),
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}

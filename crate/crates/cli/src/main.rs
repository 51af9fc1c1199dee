//! `rbml`: rebalancing, ensembles and evaluation from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rbml_core::{ErrorKind, ReportFormat};

#[derive(Debug, Parser)]
#[command(name = "rbml", version, about = "Imbalanced classification over feature vectors")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output_dir`, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Markdown,
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Markdown => ReportFormat::Markdown,
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize a feature file.
    Inspect(InspectArgs),
    /// Split a feature file into train and validation parts.
    Split(SplitArgs),
    /// Sample Gaussian blobs described by a JSON spec.
    Synth(SynthArgs),
    /// Build one rebalanced training variant.
    Rebalance(RebalanceArgs),
    /// Train the configured model and evaluate it on every pool.
    Train(TrainArgs),
    /// Train and rank every cell of a hyperparameter grid.
    Gridsearch(GridArgs),
    /// Evaluate a saved model on a feature file.
    Eval(EvalArgs),
    /// Two-component PCA scatter (CSV and SVG).
    Pca(PcaArgs),
    /// Per-layer shapes and parameter counts of a residual CNN.
    PlanCnn(PlanArgs),
    /// Re-render a saved results table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct InspectArgs {
    data: PathBuf,
    #[arg(long)]
    label_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    data: PathBuf,
    /// Fraction of rows kept for training.
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    /// Ignore class labels when splitting.
    #[arg(long)]
    uniform: bool,
    #[arg(long)]
    label_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Blob spec file: a JSON list of {name?, center, stddev, count}.
    spec: PathBuf,
    /// Output file name inside --out; the extension picks the format.
    #[arg(long, default_value = "synth.csv")]
    name: String,
}

#[derive(Debug, Args)]
struct RebalanceArgs {
    /// Variant to build; defaults to the config's `variant`.
    #[arg(long)]
    variant: Option<String>,
    /// Original training file; defaults to the config's `train.original`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Extra sources; defaults to the config's `train.extras`.
    #[arg(long)]
    extras: Option<PathBuf>,
    #[arg(long)]
    smote_k: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    target: Option<usize>,
    /// Output dataset format.
    #[arg(long, default_value = "bin")]
    ext: String,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Variant to train on; defaults to the config's `variant` or original.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Built-in grid, e.g. adaboost-exp3; overrides the config grid.
    #[arg(long)]
    preset: Option<String>,
    /// Rows in the emitted table.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature files to evaluate on; each becomes one pool.
    #[arg(required = true)]
    data: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct PcaArgs {
    /// Feature files; each gets its own fit and scatter.
    #[arg(required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    label_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// resnet18-like, resnet34-like, resnet50-like, resnet101-like or best-model.
    #[arg(long, conflicts_with_all = ["nf", "block", "nresb"])]
    preset: Option<String>,
    #[arg(long)]
    nf: Option<usize>,
    /// plain or bottleneck.
    #[arg(long)]
    block: Option<String>,
    /// Blocks per stage, e.g. 2,2,2.
    #[arg(long, value_delimiter = ',')]
    nresb: Option<Vec<usize>>,
    #[arg(long)]
    no_batchnorm: bool,
    #[arg(long, default_value_t = 16)]
    classes: usize,
    /// Input shape HxWxC.
    #[arg(long, default_value = "224x224x3")]
    input: String,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Results table or grid outcome JSON.
    input: PathBuf,
    #[arg(long)]
    top_k: Option<usize>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<rbml_core::Error>() {
            return match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Training => 3,
            };
        }
    }
    2
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

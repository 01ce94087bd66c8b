//! `pad` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::CliError;

#[derive(Debug, Parser)]
#[command(name = "pad", version, about = "Per-class activation distributions: build, score, infer, coverage, OOD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a PAD model from training activations.
    Build(BuildArgs),
    /// Write per-class KL- or Z-scores for every record.
    Score(ScoreArgs),
    /// Classify records with one strategy and report accuracy.
    Infer(InferArgs),
    /// Sweep a coverage-vs-accuracy curve.
    Coverage(CoverageArgs),
    /// Apply an OOD rejection rule.
    Ood(OodArgs),
    /// Dense network utilities.
    #[command(subcommand)]
    Net(NetCommand),
    /// Synthetic end-to-end run.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    activations: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = pad_core::activation_model::DEFAULT_SIGMA_FLOOR)]
    sigma_floor: f64,
    #[arg(long, default_value_t = pad_core::activation_model::DEFAULT_KL_EPSILON)]
    kl_epsilon: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Kl,
    Z,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ZModeArg {
    Abs,
    Signed,
}

impl From<ZModeArg> for pad_core::ZMode {
    fn from(m: ZModeArg) -> Self {
        match m {
            ZModeArg::Abs => pad_core::ZMode::Absolute,
            ZModeArg::Signed => pad_core::ZMode::Signed,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    activations: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "abs")]
    zmode: ZModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Softmax,
    Kl,
    Z,
    EnsAnd,
    EnsOpt,
}

impl From<StrategyArg> for pad_core::Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Softmax => pad_core::Strategy::Softmax,
            StrategyArg::Kl => pad_core::Strategy::KlMin,
            StrategyArg::Z => pad_core::Strategy::ZMin,
            StrategyArg::EnsAnd => pad_core::Strategy::EnsAnd,
            StrategyArg::EnsOpt => pad_core::Strategy::EnsOpt,
        }
    }
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    activations: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "abs")]
    zmode: ZModeArg,
    /// Per-sample decisions CSV.
    #[arg(long)]
    report: PathBuf,
    /// Optional one-row evaluation summary CSV (also printed to stdout).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CoverageMetricArg {
    Confidence,
    Kl,
    Z,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    activations: PathBuf,
    #[arg(long, value_enum)]
    metric: CoverageMetricArg,
    #[arg(long, value_enum, default_value = "abs")]
    zmode: ZModeArg,
    /// `auto` or a comma-separated list of thresholds.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    thresholds: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OodStrategyArg {
    S1,
    S2,
    S3,
}

#[derive(Debug, Args)]
struct OodArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    activations: PathBuf,
    #[arg(long, value_enum)]
    strategy: OodStrategyArg,
    #[arg(long, default_value_t = pad_core::ood::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = pad_core::ood::DEFAULT_BETA)]
    beta: f64,
    #[arg(long)]
    out: PathBuf,
    /// Optional list of rejected sample ids.
    #[arg(long)]
    rejected_ids: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum NetCommand {
    /// Generate Gaussian-blob train/test datasets.
    Synth(SynthArgs),
    /// Train an MLP on a dataset CSV.
    Train(TrainArgs),
    /// Run a dataset through a network and dump one layer's activations.
    Forward(ForwardArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 4)]
    features: usize,
    #[arg(long, default_value_t = 200)]
    train_per_class: usize,
    #[arg(long, default_value_t = 100)]
    test_per_class: usize,
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated hidden layer widths; empty for logistic regression.
    #[arg(long, default_value = "16")]
    hidden: String,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ForwardArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "hidden_0")]
    layer: String,
    /// PADACT01 output, or CSV when the path ends in `.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Omit ground truth from the dump.
    #[arg(long)]
    unlabeled: bool,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "demo-out")]
    out_dir: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PAD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("PAD_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        // Only fails if a pool is already installed, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Build(a) => commands::build(a),
        Command::Score(a) => commands::score(a),
        Command::Infer(a) => commands::infer(a),
        Command::Coverage(a) => commands::coverage(a),
        Command::Ood(a) => commands::ood(a),
        Command::Net(NetCommand::Synth(a)) => commands::net_synth(a),
        Command::Net(NetCommand::Train(a)) => commands::net_train(a),
        Command::Net(NetCommand::Forward(a)) => commands::net_forward(a),
        Command::Demo(a) => commands::demo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

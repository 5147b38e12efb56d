//! `magclimb`: simulate, preprocess, analyse and classify climbing-robot
//! vibration data from the command line.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magclimb::dynamics::SensorKind;
use magclimb::models::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "magclimb", version, about = "Hazard-state toolkit for magnetic-adhesion climbing robots")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write its sensor channels as CSV.
    Simulate(SimulateArgs),
    /// Tabulate the rod's gain and phase over a log-spaced frequency grid.
    RodResponse(RodArgs),
    /// Signal-quality metrics for every channel of a signal CSV.
    Quality(QualityArgs),
    /// Filter, combine, normalise and window one sensor of a signal CSV.
    Preprocess(PreprocessArgs),
    /// Train one model on a plan's dataset and evaluate it on the held-out runs.
    Train(TrainArgs),
    /// Evaluate a saved model on a plan's held-out runs.
    Evaluate(EvaluateArgs),
    /// Repeated training of several models on one shared split.
    CompareModels(CompareModelsArgs),
    /// ICNN-LSTM accuracy and signal quality per excitation level and sensor.
    CompareSensors(PlanArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON; omitted fields take their defaults.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "MAGCLIMB_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub plates: Option<u32>,
    #[arg(long)]
    pub level: Option<u8>,
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RodArgs {
    /// Rod JSON; defaults when omitted.
    #[arg(long)]
    pub rod: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QualityArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "rod")]
    pub sensor: SensorKind,
    /// Preprocessing JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cutoff_hz: Option<f64>,
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Plan JSON, or a run manifest to repeat. Defaults to the built-in plan.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, env = "MAGCLIMB_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub pool_window: Option<usize>,
    #[arg(long)]
    pub cutoff_hz: Option<f64>,
    /// Excitation level for single-dataset commands.
    #[arg(long)]
    pub level: Option<u8>,
    #[arg(long)]
    pub sensor: Option<SensorKind>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, default_value = "icnn_lstm")]
    pub model: ModelKind,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, default_value = "icnn_lstm")]
    pub model: ModelKind,
    /// Model manifest written by `train`.
    #[arg(long)]
    pub model_file: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareModelsArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Repeat to pick models; all six by default.
    #[arg(long = "model")]
    pub models: Vec<ModelKind>,
    #[arg(long)]
    pub runs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::RodResponse(a) => commands::rod_response(&a),
        Command::Quality(a) => commands::quality(&a),
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::CompareModels(a) => commands::compare_models(&a),
        Command::CompareSensors(a) => commands::compare_sensors(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! `dmap`: phantom synthesis, cross-validated voting, training, prediction and reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ModelArgs;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    Usage(String),
    /// Data or numerical failure; exit code 1.
    Run(dmap_core::Error),
}

impl From<dmap_core::Error> for CliError {
    fn from(e: dmap_core::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "dmap", version, about = "Diffusion-map embedding and ensemble classification of image tensors")]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic phantom dataset
    Synth(SynthArgs),
    /// Run 5x5 paired cross-validation with test-set voting
    Crossval(CrossvalArgs),
    /// Fit a diffusion-map space and classifier on a labelled dataset
    Train(TrainArgs),
    /// Classify new samples with a trained model
    Predict(PredictArgs),
    /// Cross-tabulate the final calls of two votes files
    TwoModel(TwoModelArgs),
    /// List abnormal subjects called normal, by vote proportion
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Subjects per class
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of the additive noise
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    /// Tensor shape as SxHxWxC
    #[arg(long, default_value = "1x12x12x1")]
    pub shape: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    /// Dataset manifest
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Held-out test subjects, drawn stratified
    #[arg(long, group = "test")]
    pub test_count: Option<usize>,
    /// Held-out fraction, drawn stratified (default 0.2)
    #[arg(long, group = "test")]
    pub test_fraction: Option<f64>,
    /// File with one test-subject id per line
    #[arg(long, group = "test")]
    pub test_ids: Option<PathBuf>,
    /// Second method for the two-model table, or `none`
    #[arg(long)]
    pub compare: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory written by `train`
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TwoModelArgs {
    /// votes.csv of model A
    #[arg(long)]
    pub a: PathBuf,
    /// votes.csv of model B
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "a")]
    pub name_a: String,
    #[arg(long, default_value = "b")]
    pub name_b: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Crossval(a) => commands::crossval(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::TwoModel(a) => commands::two_model(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

//! `monoloc`: device synthesis, corpus generation, dictionary training,
//! localization runs and reports.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or argument
//! error, 3 solver abort.

mod config;
mod report;
mod run;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monoloc::nmf::Divergence;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error(transparent)]
    Core(monoloc::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl From<monoloc::Error> for CliError {
    fn from(e: monoloc::Error) -> Self {
        match e {
            monoloc::Error::SolverAbort(_) => CliError::Solver(e.to_string()),
            monoloc::Error::InvalidArgument(_) | monoloc::Error::BudgetExceeded { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(name = "monoloc", version, about = "Monaural direction-of-arrival experiments")]
struct Cli {
    /// Worker threads for trial-level parallelism; 1 runs serially.
    #[arg(long, short = 'w', global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a scattering device and write it with a response CSV.
    Device(DeviceArgs),
    /// Write a synthetic source corpus as JSON, optionally with WAV files.
    Corpus(CorpusArgs),
    /// Learn a speech dictionary from a corpus.
    Train(TrainArgs),
    /// Run a configured experiment: results JSONL plus summary CSV.
    Run(RunArgs),
    /// Summary table and confusion matrices from a results directory.
    Report(ReportArgs),
    /// Localize the sources in one WAV file.
    Localize(LocalizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Rough,
    Smooth,
}

#[derive(Debug, Args)]
pub struct DeviceArgs {
    #[arg(long, value_enum, default_value = "rough")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 360)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 1024)]
    pub window_len: usize,
    /// Defaults to `$MONOLOC_OUTPUT/device-<kind>-<directions>-<seed>.mlc`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 0)]
    pub female: usize,
    #[arg(long, default_value_t = 0)]
    pub male: usize,
    /// White-noise sources.
    #[arg(long, default_value_t = 0)]
    pub white: usize,
    #[arg(long, default_value_t = 0)]
    pub first_identity: u64,
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also render every source to `<out stem>-wav/<label>.wav`.
    #[arg(long)]
    pub wav: bool,
    #[arg(long, default_value_t = 16000)]
    pub sample_rate: u32,
    /// Defaults to `$MONOLOC_OUTPUT/corpus.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus JSON written by `monoloc corpus`.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value = "itakura-saito", value_parser = parse_divergence)]
    pub divergence: Divergence,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub fmax: f64,
    #[arg(long, default_value_t = 16000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 1024)]
    pub window_len: usize,
    /// Defaults to `$MONOLOC_OUTPUT/dictionary.mlc`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, short)]
    pub config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the configured trial count.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Overrides the configured trial seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `monoloc run`.
    #[arg(long)]
    pub results: PathBuf,
    /// Defaults to the results directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Heatmap cell size in pixels.
    #[arg(long, default_value_t = 12)]
    pub cell: usize,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Mono WAV recording.
    #[arg(long)]
    pub wav: PathBuf,
    /// Device file on the model grid.
    #[arg(long)]
    pub device: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    #[arg(long, value_enum, default_value = "white")]
    pub method: LocalizeMethod,
    /// Dictionary for `--method nmf`; a flat single atom when omitted.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long, default_value = "itakura-saito", value_parser = parse_divergence)]
    pub divergence: Divergence,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub fmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LocalizeMethod {
    White,
    Nmf,
}

fn parse_divergence(s: &str) -> Result<Divergence, String> {
    s.parse().map_err(|e: monoloc::Error| e.to_string())
}

/// Serial for one worker, otherwise a rayon pool of the requested size.
fn executor(workers: Option<usize>) -> Result<monoloc::Exec, CliError> {
    match workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(1) => Ok(monoloc::Exec::Serial),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(monoloc::Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(monoloc::Exec::Serial),
        None => Ok(monoloc::Exec::Parallel),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let exec = executor(cli.workers)?;
    match cli.command {
        Command::Device(a) => tools::device(&a),
        Command::Corpus(a) => tools::corpus(&a),
        Command::Train(a) => tools::train(&a, exec),
        Command::Run(a) => run::run(&a, exec),
        Command::Report(a) => report::report(&a),
        Command::Localize(a) => tools::localize(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("monoloc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

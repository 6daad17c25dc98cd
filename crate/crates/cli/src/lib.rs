//! `ictus` — the seizure-prediction pipeline as one executable.
//!
//! Subcommands mirror the pipeline stages: `synth` makes a labeled dataset,
//! `analyze` reports exploratory statistics, `preprocess` builds the
//! spectrogram tensor cache, `train` fits the multi-scale CNN, `eval` scores
//! the test split, `predict` emits clip probabilities.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation error (with a
//! machine-readable JSON line on stderr), 64 unknown subcommand. Identical
//! flags, config and seed produce byte-identical reports; the one
//! non-deterministic field (a generation timestamp) is suppressed by
//! `--no-timestamp`.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use ictus_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_UNKNOWN_SUBCOMMAND: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "ictus",
    version,
    about = "iEEG seizure prediction: synthesize, analyze, preprocess, train, evaluate, predict"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled iEEG dataset with a manifest.
    Synth(SynthArgs),
    /// Per-patient exploratory statistics: boxplot summaries, PCA,
    /// correlation, sensor clustering, distribution shift, outliers.
    Analyze(AnalyzeArgs),
    /// Decimate, segment and transform clips into a standardized
    /// spectrogram tensor cache.
    Preprocess(PreprocessArgs),
    /// Train the multi-scale CNN on a preprocessed cache.
    Train(TrainArgs),
    /// Score a trained model on the manifest's test split.
    Eval(EvalArgs),
    /// Emit clip-level probabilities for every clip in a manifest.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Run configuration JSON (defaults apply when omitted).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving manifest.json and the clip files.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Master RNG seed; overrides synth.rng_seed from the config.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run configuration JSON; paths.data must point at a manifest.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving one analysis JSON per patient.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Omit the generation timestamp so reruns are byte-identical.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Run configuration JSON; paths.data must point at a manifest.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving the tensor cache (index.json + blobs).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Decimation factor; overrides pipeline.decimation_factor.
    #[arg(long, value_name = "{2|4}")]
    pub factor: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration JSON; paths.cache must point at a tensor cache.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving model.json and history.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Master RNG seed; overrides train.rng_seed from the config.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run configuration JSON; paths.model and paths.data are required.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving eval.json and roc.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Clip aggregation rule; overrides eval.rule.
    #[arg(long, value_name = "{max|mean}")]
    pub rule: Option<String>,
    /// Decision threshold in [0,1]; overrides eval.threshold.
    #[arg(long, value_name = "F")]
    pub threshold: Option<f64>,
    /// Omit the generation timestamp so reruns are byte-identical.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Run configuration JSON; paths.model and paths.data are required.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving predictions.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Clip aggregation rule; overrides eval.rule.
    #[arg(long, value_name = "{max|mean}")]
    pub rule: Option<String>,
}

/// Full CLI entry point: parse, dispatch, map errors to exit codes.
pub fn main_impl() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => return clap_exit(e),
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            emit_error(&e);
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_IO
            }
        }
    }
}

pub fn run(cli: Cli) -> ictus_core::Result<()> {
    match cli.command {
        Command::Synth(args) => commands::synth::run(&args),
        Command::Analyze(args) => commands::analyze::run(&args),
        Command::Preprocess(args) => commands::preprocess::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Eval(args) => commands::infer::run_eval(&args),
        Command::Predict(args) => commands::infer::run_predict(&args),
    }
}

fn clap_exit(e: clap::Error) -> i32 {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            print!("{e}");
            EXIT_OK
        }
        ErrorKind::InvalidSubcommand => {
            eprint!("{e}");
            emit_error_line("unknown_subcommand", &e.to_string());
            EXIT_UNKNOWN_SUBCOMMAND
        }
        _ => {
            eprint!("{e}");
            emit_error_line("usage", &e.to_string());
            EXIT_VALIDATION
        }
    }
}

/// Stable identifier for each failure class, for scripts driving the tool.
fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::BadMagic { .. }
        | Error::UnsupportedVersion(_)
        | Error::Truncated { .. }
        | Error::InvalidHeader(_)
        | Error::InvalidLabel(_) => "malformed_clip",
        Error::MalformedManifest { .. } => "malformed_manifest",
        Error::MissingClipFile { .. } => "missing_clip_file",
        Error::DuplicateClipId { .. } => "duplicate_clip_id",
        Error::EmptyInput(_) => "empty_input",
        Error::ShapeMismatch(_) => "shape_mismatch",
        Error::NonFinite(_) | Error::NonFiniteGradient(_) => "non_finite",
        Error::ZeroVariance { .. } => "zero_variance",
        Error::DegenerateData(_) => "degenerate_data",
        Error::TooShort(_) => "too_short",
        Error::InvalidConfig(_) => "invalid_config",
        Error::SingleClass(_) => "single_class",
        Error::MalformedCache { .. } => "malformed_cache",
        Error::MalformedModel { .. } => "malformed_model",
    }
}

fn emit_error(e: &Error) {
    emit_error_line(error_kind(e), &e.to_string());
}

/// The last stderr line on failure is a single machine-readable JSON object.
fn emit_error_line(kind: &str, message: &str) {
    let doc = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{doc}");
}

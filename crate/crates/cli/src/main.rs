mod commands;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Hybrid transformer / hard-decision decoding of BCH codes.
#[derive(Parser, Debug)]
#[command(name = "hecct", version)]
struct Cli {
    /// Worker threads for simulation and training (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// TOML file of option values (keys are long flag names), or a
    /// `.meta.json` sidecar from an earlier run. Flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write parity-check and generator matrices of a narrow-sense BCH code.
    Codegen(CodegenArgs),
    /// Train an ECCT decoder and write a checkpoint.
    Train(TrainArgs),
    /// Measure FER/BER of a decoding pipeline over an SNR grid.
    Eval(EvalArgs),
    /// Histogram the number of errors left by the ECCT decoder.
    Hist(HistArgs),
    /// Run every pipeline configuration on shared frames.
    Ablate(AblateArgs),
    /// Estimate the hard-decision decoder's undetected and detected error rates.
    Profile(ProfileArgs),
    /// Check the loss decomposition and the logistic bound numerically.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CodeArgs {
    /// Field exponent: n = 2^m - 1.
    #[arg(long)]
    m: Option<u32>,
    /// Designed error-correction capability.
    #[arg(long)]
    t: Option<usize>,
    /// Load the parity-check matrix from a file instead.
    #[arg(long, conflicts_with_all = ["m", "t"])]
    h: Option<PathBuf>,
    /// Format of `--h`: dense or alist.
    #[arg(long)]
    h_format: Option<String>,
    /// Minimum distance of a loaded code (required when k > 20).
    #[arg(long)]
    d_min: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct StopArgs {
    /// Comma-separated Eb/N0 points in dB.
    #[arg(long)]
    snr: Option<String>,
    /// Stop a point after this many frame errors (in every pipeline).
    #[arg(long)]
    min_errors: Option<u64>,
    /// Stop a point after this many frames.
    #[arg(long)]
    max_frames: Option<u64>,
    /// Transmit the all-zero codeword instead of random codewords.
    #[arg(long)]
    zero_codeword: bool,
    /// Add a wall-clock `seconds` column (makes the CSV nondeterministic).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
pub struct CodegenArgs {
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    t: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    ffn_mult: Option<usize>,
    /// gelu or relu.
    #[arg(long)]
    activation: Option<String>,
    /// Seed of the parameter initialization.
    #[arg(long)]
    init_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    snr_low: Option<f64>,
    #[arg(long)]
    snr_high: Option<f64>,
    /// bce, hybrid-pre-post, hybrid-pre or hybrid-post.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    ste_temperature: Option<f64>,
    /// Gate argument: soft (soft Hamming estimate) or integer (sign errors).
    #[arg(long)]
    gate: Option<String>,
    /// Also write the checkpoint every this many steps (0: only at the end).
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint path. The per-step log goes to `<out>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Run the hard-decision pre-decoder first.
    #[arg(long, conflicts_with = "no_pre")]
    pre: bool,
    #[arg(long)]
    no_pre: bool,
    /// Run the hard-decision post-decoder on non-codeword ECCT outputs.
    #[arg(long, conflicts_with = "no_post")]
    post: bool,
    #[arg(long)]
    no_post: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    stop: StopArgs,
    /// ECCT checkpoint. Without it the soft stage is the plain hard decision.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HistArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Eb/N0 in dB.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    stop: StopArgs,
    /// Checkpoint trained with the bce loss.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Checkpoint trained with the hybrid-post loss.
    #[arg(long)]
    hybrid_post: Option<PathBuf>,
    /// Checkpoint trained with the hybrid-pre-post loss.
    #[arg(long)]
    hybrid_pre_post: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Comma-separated Eb/N0 points in dB.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Inner decoder: identity, hdd or ecct.
    #[arg(long)]
    inner: Option<String>,
    /// ECCT checkpoint for `--inner ecct`; a freshly initialized model is
    /// used when absent.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated Eb/N0 points in dB.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    frames: Option<u64>,
    /// Normal quantile of the confidence intervals.
    #[arg(long)]
    z: Option<f64>,
    /// Random score/target vectors for the bound check.
    #[arg(long)]
    bound_vectors: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Bad flags, bad config or inconsistent inputs (exit code 1).
#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        UsageError(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// How a successful run ended.
pub enum Outcome {
    Ok,
    /// An oracle check failed (exit code 3).
    Violation(String),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<hybrid_ecct::Error>() {
        Some(hybrid_ecct::Error::Divergence { .. } | hybrid_ecct::Error::AllMaskedRow(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command, cli.config.as_deref()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

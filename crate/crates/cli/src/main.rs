//! `aespace` command-line entry point.

mod commands;
mod metadata;

use std::path::PathBuf;
use std::process::ExitCode;

use aespace::sampler::PairRef;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "aespace",
    version,
    about = "Aesthetic embedding space from view/fave statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known latent scores.
    Synth(SynthArgs),
    /// Compute per-record scores as CSV `id,score`.
    Score(ScoreArgs),
    /// Draw training triplets by rejection sampling.
    Sample(SampleArgs),
    /// Train an encoder with the directional triplet loss.
    Train(TrainArgs),
    /// Write embeddings for every record.
    Embed(EmbedArgs),
    /// Rank a collection by embedding norm.
    Rank(RankArgs),
    /// Pairwise agreement of the norm ordering with the true scores.
    Eval(EvalArgs),
    /// Score, smooth and find peaks in a frame sequence.
    Video(VideoArgs),
}

#[derive(Debug, Args)]
struct SeedArg {
    /// RNG seed. Falls back to AESPACE_SEED when the flag is absent.
    #[arg(long, env = "AESPACE_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of records.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    din: usize,
    /// Standard deviation of the feature noise.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[command(flatten)]
    seed: SeedArg,
    /// Smallest view count.
    #[arg(long, default_value_t = 1000)]
    view_lo: u64,
    /// Largest view count.
    #[arg(long, default_value_t = 1_000_000)]
    view_hi: u64,
    /// Output dataset (JSON lines). A `.synth.json` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write a score histogram CSV.
    #[arg(long)]
    hist_out: Option<PathBuf>,
    /// Histogram bin count.
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of triplets to draw.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Lower bound of the ratio window (exclusive).
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Upper bound of the ratio window (exclusive).
    #[arg(long, default_value_t = 0.75)]
    beta: f64,
    /// Reference score for the pair.
    #[arg(long, default_value_t = PairRef::Mean)]
    pair_ref: PairRef,
    /// Maximum consecutive proposals per accepted triplet.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    #[command(flatten)]
    seed: SeedArg,
    /// Triplet CSV output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 16)]
    embed_dim: usize,
    /// Hidden layer widths, comma separated. Empty for a single affine layer.
    #[arg(long, default_value = "64,32", value_delimiter = ',')]
    hidden: Vec<String>,
    /// Triplet margin m.
    #[arg(long, default_value_t = 0.2)]
    margin: f64,
    /// Directional margin.
    #[arg(long, default_value_t = 0.1)]
    dir_margin: f64,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, default_value_t = 0.75)]
    beta: f64,
    /// Initial learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Maximum SGD steps.
    #[arg(long, default_value_t = 30_000)]
    steps: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    model_out: PathBuf,
    /// Per-window training log CSV.
    #[arg(long)]
    log_out: PathBuf,
    /// Train with the plain triplet loss only.
    #[arg(long)]
    no_directional: bool,
    /// Use the signed (unbounded) form of the directional term.
    #[arg(long)]
    literal_sign: bool,
    #[arg(long, default_value_t = PairRef::Mean)]
    pair_ref: PairRef,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// JSON lines with `id`, `score` (embedding norm) and `embedding`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Ranked CSV `rank,id,score`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Truth {
    /// Score derived from views and faves.
    Score,
    /// The `latent_score` field of synthetic records.
    Latent,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Score-gap thresholds, comma separated and strictly increasing.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6", value_delimiter = ',')]
    thresholds: Vec<f64>,
    /// Ground truth to compare against.
    #[arg(long, value_enum, default_value_t = Truth::Score)]
    truth: Truth,
    /// Agreement CSV `delta,pairs,agreement`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VideoArgs {
    #[arg(long)]
    model: PathBuf,
    /// Frame records (JSON lines) in temporal order.
    #[arg(long)]
    frames: PathBuf,
    /// Process-noise variance.
    #[arg(long, default_value_t = 1e-4)]
    q: f64,
    /// Measurement-noise variance.
    #[arg(long, default_value_t = 1e-2)]
    r: f64,
    /// Initial estimate variance.
    #[arg(long, default_value_t = 1.0)]
    p0: f64,
    /// Minimum index distance between kept peaks.
    #[arg(long, default_value_t = 1)]
    min_sep: usize,
    /// Minimum peak prominence.
    #[arg(long, default_value_t = 0.0)]
    min_prom: f64,
    /// CSV `frame,raw_score,smoothed_score,is_peak`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let matches = Cli::command()
        .mut_subcommands(|c| c.allow_negative_numbers(true))
        .get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(aespace::Error::Config(msg)) = err.downcast_ref::<aespace::Error>() {
                Cli::command()
                    .error(clap::error::ErrorKind::ValueValidation, msg)
                    .exit();
            }
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

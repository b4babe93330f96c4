//! Command-line syntax.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "duss",
    version,
    about = "Discrete speech unit codec and synthesis toolkit"
)]
pub struct Cli {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// vocoder-16k, acoustic-1024, acoustic-512 or acoustic-256.
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Random seed; falls back to the config file, then DUSS_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic sine-mixture corpus and its manifest.
    SynthCorpus(SynthCorpusArgs),
    /// Train a residual vector quantizer on the train split of a manifest.
    TrainCodec(TrainCodecArgs),
    /// Convert a WAV file into a token file.
    Encode(EncodeArgs),
    /// Convert a token file into a WAV file.
    Decode(DecodeArgs),
    /// Train an n-gram token model on the codec's encoding of a manifest.
    TrainLm(TrainLmArgs),
    /// Sample token sequences from a token model and render them.
    Generate(GenerateArgs),
    /// Random search over k, p and temperature.
    Tune(TuneArgs),
    /// MCD and log-F0 RMSE between two manifests.
    Evaluate(EvaluateArgs),
    /// Style exclusion and score filtering of a manifest.
    CorpusFilter(CorpusFilterArgs),
    /// Print the resolved configuration.
    ShowConfig,
}

#[derive(Debug, Args)]
pub struct SynthCorpusArgs {
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Defaults to the configured codec rate.
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainCodecArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Style tag to drop before training; repeatable, added to `exclude_styles`.
    #[arg(long = "exclude-style")]
    pub exclude_style: Vec<String>,
    /// Also write the training report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub codec: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub codec: PathBuf,
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Print the MCD between this WAV and the reconstruction.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Write 32-bit float samples instead of 16-bit PCM.
    #[arg(long)]
    pub float: bool,
}

#[derive(Debug, Args)]
pub struct TrainLmArgs {
    #[arg(long)]
    pub codec: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "exclude-style")]
    pub exclude_style: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long)]
    pub codec: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    #[arg(short = 'p', long)]
    pub p: Option<f64>,
    #[arg(short = 't', long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TuneScorer {
    /// Negative distance of decoded frames from the training centroid.
    Centroid,
    /// The separable test objective of the sampling parameters alone.
    Synthetic,
    /// Always 1.0.
    Constant,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long)]
    pub codec: PathBuf,
    /// JSON-lines trial history output.
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Number of development contexts (empty prompts).
    #[arg(long, default_value_t = 4)]
    pub contexts: usize,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long, value_enum, default_value_t = TuneScorer::Centroid)]
    pub scorer: TuneScorer,
    /// Also write the best trial and importances as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub synthesized: PathBuf,
    /// JSON report output.
    #[arg(long)]
    pub out: PathBuf,
    /// Encode the synthesized audio with this codec to measure its bitrate.
    #[arg(long)]
    pub codec: Option<PathBuf>,
    /// Also write the plain-text table.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterScorer {
    /// RMS level in dBFS.
    Level,
    /// Fraction of voiced frames.
    Voicing,
}

#[derive(Debug, Args)]
pub struct CorpusFilterArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "exclude-style")]
    pub exclude_style: Vec<String>,
    #[arg(long, value_enum, requires = "threshold")]
    pub scorer: Option<FilterScorer>,
    #[arg(long, requires = "scorer", allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Per-style score distribution as CSV.
    #[arg(long, requires = "scorer")]
    pub scores_csv: Option<PathBuf>,
}

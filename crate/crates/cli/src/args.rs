// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idani_core::{Format, RankMethod};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "idani", version, about = "Neuron-level interventions for inference-time domain adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Element-wise mean of one or two representation sets.
    Mean(MeanArgs),
    /// Rank neurons by domain informativeness.
    Rank(RankArgs),
    /// Shift target representations toward the source domain.
    Intervene(InterveneArgs),
    /// Grid search over k and beta, scored with a frozen head.
    Sweep(SweepArgs),
    /// Mean ± standard error across per-seed sweep reports.
    Aggregate(AggregateArgs),
    /// Pick (method, k, beta) on a labeled dev set, then apply it to a test set.
    SelectThenApply(SelectArgs),
    /// Generate synthetic sets with planted domain neurons.
    Synth(SynthArgs),
    /// Tokens whose rows improved the most under an intervention.
    Attribute(AttributeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Probeless,
    Linear,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<RankMethod> {
        match self {
            MethodChoice::Probeless => vec![RankMethod::Probeless],
            MethodChoice::Linear => vec![RankMethod::Linear],
            MethodChoice::Both => vec![RankMethod::Probeless, RankMethod::Linear],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatChoice {
    Binary,
    Csv,
}

impl From<FormatChoice> for Format {
    fn from(f: FormatChoice) -> Self {
        match f {
            FormatChoice::Binary => Format::Binary,
            FormatChoice::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MeanArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Directory for mean.json; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum, default_value = "probeless")]
    pub method: MethodChoice,
    /// Seed for the linear probe.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for ranking_<method>.json; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct InterveneArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum, default_value = "probeless")]
    pub method: MethodChoice,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 8.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatChoice,
    /// Allow beta outside [1, 10].
    #[arg(long)]
    pub allow_out_of_range: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// Labeled target set.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodChoice,
    /// Comma-separated k values; defaults to a log-spaced grid over [0, d].
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Comma-separated beta values; defaults to 1..=10.
    #[arg(long, value_delimiter = ',')]
    pub beta_grid: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// One report per seed, written as sweep_seed<N>.{json,csv}.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub allow_out_of_range: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AggregateArgs {
    /// Sweep report JSON files, one per seed.
    #[arg(required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Directory for aggregate.json; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// Labeled target-domain development set used for selection.
    #[arg(long)]
    pub dev: PathBuf,
    /// Target-domain test set; its labels, if any, are read only after selection.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodChoice,
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub beta_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatChoice,
    #[arg(long)]
    pub allow_out_of_range: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatChoice,
    #[arg(long, default_value_t = 128)]
    pub d: usize,
    /// Rows per domain.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Number of planted domain neurons.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Shift added to planted neurons in target rows.
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub shift: f64,
    #[arg(long, default_value_t = 4)]
    pub task_neurons: usize,
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Class-0 head weight on each planted domain neuron.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub head_leakage: f64,
    /// Attach a random token to every row.
    #[arg(long)]
    pub tokens: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AttributeArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// Labeled target set carrying tokens.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long, value_enum, default_value = "probeless")]
    pub method: MethodChoice,
    /// Defaults to 50, clamped to d.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 8.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Directory for attribution.json; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub allow_out_of_range: bool,
}

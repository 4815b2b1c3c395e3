//! Command-line surface. Every subcommand's arguments double as its recorded
//! configuration, so a report's `config` field can be replayed verbatim.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FIID_OUT_DIR";

#[derive(Debug, Clone, Parser)]
#[command(name = "fiid", version, about = "Factor-of-IID experiments on regular trees and graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed; drawn from entropy and recorded when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file. Defaults to a file in $FIID_OUT_DIR, else standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Table of closed-form constants for one degree.
    VerifyFormulas(VerifyArgs),
    /// Uniform random simple d-regular graph.
    GenGraph(GenGraphArgs),
    /// Samples of a process on a tree ball, one JSON record each.
    SampleProcess(SampleArgs),
    /// Gaussian block factor on a graph or tree ball.
    GaussField(GaussArgs),
    /// Sphere-sum statistics and the obstruction verdict.
    Obstruct(ObstructArgs),
    /// Block-factor bisection: raw, rebalanced and improved.
    Bisect(BisectArgs),
    /// Per-edge cut frequencies of the alternating block factor.
    Edgecut(EdgecutArgs),
    /// Re-runs the configuration recorded in a report.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyFormulas(_) => "verify-formulas",
            Command::GenGraph(_) => "gen-graph",
            Command::SampleProcess(_) => "sample-process",
            Command::GaussField(_) => "gauss-field",
            Command::Obstruct(_) => "obstruct",
            Command::Bisect(_) => "bisect",
            Command::Edgecut(_) => "edgecut",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    /// Block-factor radius for the edge-cut rows.
    #[arg(long, default_value_t = 327)]
    pub radius: u32,
}

/// A graph read from an edge-list file or generated from the seed.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GraphSource {
    /// Vertices of a generated random d-regular graph.
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge-list file; takes precedence over --n.
    #[arg(long)]
    pub graph_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenGraphArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub d: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    Iid,
    McDirect,
    McCluster,
    PerfectMatching,
    Coloring,
    MatchingList,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub process: ProcessKind,
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    #[arg(long, default_value_t = 3)]
    pub radius: u32,
    /// Markov parameter, for the mc processes.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Number of samples.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignArg {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GaussArgs {
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    /// Block-factor radius n (sums over distances below n).
    #[arg(long, default_value_t = 3)]
    pub radius: u32,
    #[arg(long, value_enum, default_value_t = SignArg::Minus)]
    pub sign: SignArg,
    /// Tree-ball radius, used when no graph is given (default: radius + 2).
    #[arg(long)]
    pub ball_radius: Option<u32>,
    #[command(flatten)]
    pub graph: GraphSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstructProcess {
    Iid,
    McDirect,
    McCluster,
    /// Closed-form Markov-chain statistics.
    McExact,
    Gauss,
    GaussSign,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ObstructArgs {
    #[arg(long, value_enum, default_value_t = ObstructProcess::McDirect)]
    pub process: ObstructProcess,
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Largest sphere radius.
    #[arg(long, default_value_t = 6)]
    pub radius: u32,
    /// Smallest sphere radius.
    #[arg(long, default_value_t = 2)]
    pub min_radius: u32,
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    /// Block-factor radius for the Gaussian processes.
    #[arg(long, default_value_t = 3)]
    pub block_radius: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Min,
    Max,
    Both,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BisectArgs {
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    /// Block-factor radius.
    #[arg(long, default_value_t = 3)]
    pub radius: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = fiid_core::partition::DEFAULT_MAX_PASSES)]
    pub max_passes: usize,
    #[command(flatten)]
    pub graph: GraphSource,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EdgecutArgs {
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    /// Block-factor radius.
    #[arg(long, default_value_t = 3)]
    pub radius: u32,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    /// Report only the theoretical bound and the girth it needs.
    #[arg(long)]
    pub bound_only: bool,
    #[command(flatten)]
    pub graph: GraphSource,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// A JSON report written by this tool.
    pub report: PathBuf,
}

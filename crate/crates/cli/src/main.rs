//! `analyze`: isoperimetry, KKL/junta and SDP-lifting experiments on Cartesian
//! powers, reported as sorted-key JSON.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails or the
//! analysis itself errors, 1 for usage and I/O problems.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod examples;
mod input;
mod report;
mod sdp_lift;

use input::Builtin;

#[derive(Debug, Parser)]
#[command(name = "analyze", version, about = "Analysis of graph Cartesian powers G^k")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Conductance, spectral gap and log-Sobolev estimates of G and G^k.
    Isoperimetry(GraphArgs),
    /// Influence report and lemma checks for functions on G^k.
    Kkl(KklArgs),
    /// Junta approximation of a {-1,+1} function on G^k.
    Friedgut(FriedgutArgs),
    /// Lift SDP, Lasserre and Sherali-Adams solutions from G to G^k.
    SdpLift(SdpArgs),
    /// Write sample input files.
    Examples(ExamplesArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    /// Base graph as JSON `{"n": .., "edges": [[u, v, w], ..]}`.
    #[arg(long, conflicts_with = "builtin")]
    pub graph: Option<PathBuf>,
    /// k2, kq:Q, cycle:N, path:N or necklace:R (default k2).
    #[arg(long)]
    pub builtin: Option<Builtin>,
    /// Power k (default 2, or the k of a function file).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest product materialized densely.
    #[arg(long, default_value_t = cartesian_influence::DEFAULT_DENSE_CAP)]
    pub max_dense: usize,
    /// Report path (stdout when absent).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl GraphArgs {
    pub fn k_or_default(&self) -> usize {
        self.k.unwrap_or(2)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    Dictator,
    NoisyDictator,
    Parity,
    Constant,
    Random,
    Balanced,
    ConsecutiveOnes,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KklArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    /// Function file `{"k": .., "values": [..]}`; overrides --fn.
    #[arg(long)]
    pub function: Option<PathBuf>,
    #[arg(long = "fn", value_enum, default_value_t = FunctionKind::Dictator)]
    pub kind: FunctionKind,
    /// Random functions in a sweep, or Monte-Carlo samples for consecutive-ones.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Lemma parameter t in (0, 1/e^2]; repeatable (default 1/e^2, 0.05, 0.01).
    #[arg(long = "t")]
    pub t: Vec<f64>,
    /// Log-Sobolev constant of the base graph (default: exact value for
    /// complete graphs, optimizer estimate otherwise).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction of flipped vertices for noisy-dictator.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FriedgutArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub function: Option<PathBuf>,
    #[arg(long = "fn", value_enum, default_value_t = FunctionKind::NoisyDictator)]
    pub kind: FunctionKind,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Random permutation trials for the junta-invariance test.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SdpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    /// SDP solution `{"d": .., "vectors": [..]}` (default: basic SDP optimum).
    #[arg(long)]
    pub sdp: Option<PathBuf>,
    /// Lasserre solution `{"t": .., "sets": [{"S": [..], "vec": [..]}]}`.
    #[arg(long)]
    pub lasserre: Option<PathBuf>,
    /// Sherali-Adams distributions `{"t": .., "dists": [{"T": [..], "probs": {..}}]}`.
    #[arg(long)]
    pub sa: Option<PathBuf>,
    /// Hierarchy level (default: the level of the supplied file, else 2).
    #[arg(long)]
    pub t_level: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExamplesArgs {
    /// Directory receiving the sample files.
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let (report, out) = match cli.command {
        Command::Isoperimetry(args) => (commands::isoperimetry(&args)?, args.out),
        Command::Kkl(args) => (commands::kkl(&args)?, args.graph.out.clone()),
        Command::Friedgut(args) => (commands::friedgut(&args)?, args.graph.out.clone()),
        Command::SdpLift(args) => (sdp_lift::run(&args)?, args.graph.out.clone()),
        Command::Examples(args) => (examples::run(&args)?, None),
    };
    report.write(out.as_deref())?;
    Ok(report.exit_code())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code as u8,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(execute(std::env::args_os()))
}

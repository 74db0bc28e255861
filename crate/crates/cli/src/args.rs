use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

/// Pareto frontiers of loss guarantees in discounted repeated games.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "setdp", version, about)]
pub struct Cli {
    /// Worker threads for LP batches and simulation runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Approximate the optimal frontier by value iteration.
    Solve(SolveArgs),
    /// Extract a mode strategy from a solve.
    Strategy(StrategyArgs),
    /// Compute the exact guarantees of the extracted strategy.
    Evaluate(EvaluateArgs),
    /// Estimate one forecaster's discounted regret against one adversary.
    Simulate(SimulateArgs),
    /// Regret table across forecasters and adversaries.
    Compare(CompareArgs),
    /// Distance of a two-expert β = 1/2 solve from the closed-form frontier.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GameArgs {
    /// Built-in game (experts2, experts3, example) or a JSON game file.
    #[arg(long)]
    pub game: Option<String>,

    /// Discount factor; overrides the one in a game file.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Direction grid resolution N.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,

    /// Value-iteration steps n; with --tol, the step cap.
    #[arg(long)]
    pub iters: Option<usize>,

    /// Stop once consecutive iterates differ by at most this (normalized units).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StrategyArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Reuse a solve.json instead of solving.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Reuse a solve.json instead of solving.
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// Policy-evaluation accuracy, normalized units.
    #[arg(long, default_value_t = setdp::strategy::EVAL_TOL)]
    pub eval_tol: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulationArgs {
    #[arg(long, default_value_t = 10_000)]
    pub runs: usize,
    #[arg(long, default_value_t = 100)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Starting point of our strategy: minmax, prior:w1,... or param:p1,...
    #[arg(long, default_value = "minmax")]
    pub target: String,
    /// Strategy file for the `ours` forecaster; solved from --grid/--iters otherwise.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Hedge learning rate; defaults to √(8 ln K (1-β²)).
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub sim: SimulationArgs,
    /// ours, hedge or gps.
    #[arg(long, default_value = "ours")]
    pub forecaster: String,
    /// One of A-F.
    #[arg(long)]
    pub adversary: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub sim: SimulationArgs,
    /// Comma-separated list drawn from ours, hedge, gps.
    #[arg(long, default_value = "ours,hedge,gps")]
    pub forecasters: String,
    /// Comma-separated adversary names.
    #[arg(long)]
    pub adversaries: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Points sampled along the closed-form curve.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Direction grid resolution M for the sampled distance.
    #[arg(long, default_value_t = 2000)]
    pub directions: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

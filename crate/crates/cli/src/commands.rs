use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use setdp::baselines::{results_csv, simulate, Adversary, ForecasterSpec, ResultRow};
use setdp::game::{example_game, experts_game, regret_game, GameFile, ScalarGame, ScalarGameFile, VectorGame};
use setdp::geometry::vertices_csv;
use setdp::solver::{oracle_check, solve, ErrorBounds, OracleReport, SolveResult, Stopping};
use setdp::strategy::{bound_check, evaluate_strategy, extract_strategy, BoundCheck, ModeStrategy, Target};

use crate::args::{
    Cli, Command, CompareArgs, EvaluateArgs, GameArgs, OracleArgs, SimulateArgs, SimulationArgs, SolveArgs,
    SolverArgs, StrategyArgs,
};
use crate::failure::{CliResult, Failure};

const DEFAULT_ITERS: usize = 30;
const DEFAULT_MAX_ITERS: usize = 1000;

/// Every file written by a command: the result plus what produced it.
#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub version: String,
    pub config: Cli,
    pub result: T,
}

pub fn run(cli: &Cli) -> CliResult<Value> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Solve(a) => run_solve(cli, a),
        Command::Strategy(a) => run_strategy(cli, a),
        Command::Evaluate(a) => run_evaluate(cli, a),
        Command::Simulate(a) => run_simulate(cli, a),
        Command::Compare(a) => run_compare(cli, a),
        Command::OracleCheck(a) => run_oracle(cli, a),
    }
}

struct LoadedGame {
    vector: VectorGame,
    scalar: Option<ScalarGame>,
}

fn need_beta(args: &GameArgs, name: &str) -> CliResult<f64> {
    args.beta.ok_or_else(|| Failure::config(format!("--beta is required for the built-in game {name}")))
}

fn load_game(args: &GameArgs) -> CliResult<LoadedGame> {
    let name = args.game.as_deref().ok_or_else(|| Failure::config("--game is required"))?;
    match name {
        "experts2" | "experts3" => {
            let k = if name == "experts2" { 2 } else { 3 };
            let scalar = experts_game(k)?;
            let vector = regret_game(&scalar, need_beta(args, name)?)?;
            Ok(LoadedGame { vector, scalar: Some(scalar) })
        }
        "example" => Ok(LoadedGame { vector: example_game(need_beta(args, name)?)?, scalar: None }),
        path if !path.contains(['/', '.']) && !Path::new(path).exists() => Err(Failure::config(format!(
            "unknown game {path:?}; expected experts2, experts3, example or a JSON file"
        ))),
        path => {
            let text = read_text(Path::new(path))?;
            let value: Value =
                serde_json::from_str(&text).map_err(|e| Failure::config(format!("{path}: {e}")))?;
            if value.get("k").is_some() {
                let file: GameFile = from_value(value, path)?;
                let mut vector = VectorGame::from_file(&file)?;
                if let Some(beta) = args.beta {
                    vector = vector.with_beta(beta)?;
                }
                Ok(LoadedGame { vector, scalar: None })
            } else {
                let file: ScalarGameFile = from_value(value, path)?;
                let scalar = ScalarGame::new(file.losses)?;
                let vector = regret_game(&scalar, args.beta.unwrap_or(file.beta))?;
                Ok(LoadedGame { vector, scalar: Some(scalar) })
            }
        }
    }
}

fn from_value<T: DeserializeOwned>(value: Value, path: &str) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| Failure::config(format!("{path}: {e}")))
}

fn stopping(args: &SolverArgs) -> Stopping {
    match args.tol {
        Some(tol) => Stopping::Tolerance { tol, max_iterations: args.iters.unwrap_or(DEFAULT_MAX_ITERS) },
        None => Stopping::Iterations(args.iters.unwrap_or(DEFAULT_ITERS)),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn read_artifact<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    let a: Artifact<T> =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Ok(a.result)
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::io(&path, e))
}

fn write_artifact<T: Serialize>(dir: &Path, name: &str, cli: &Cli, result: &T) -> CliResult<()> {
    let artifact = Artifact { version: setdp::VERSION.to_string(), config: cli.clone(), result };
    let text = serde_json::to_string_pretty(&artifact).expect("artifacts serialize");
    write_text(dir, name, &(text + "\n"))
}

fn solve_or_load(game: &GameArgs, solver: &SolverArgs, from: Option<&Path>) -> CliResult<SolveResult> {
    match from {
        Some(path) => read_artifact(path),
        None => Ok(solve(&load_game(game)?.vector, solver.grid, stopping(solver))?),
    }
}

/// Error bounds and minmax readout of a solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub beta: f64,
    pub grid_n: usize,
    pub grid_points: usize,
    pub iterations: usize,
    pub converged: bool,
    pub last_delta: Option<f64>,
    pub next_delta: f64,
    /// Raw length of one normalized unit is `1/scale`.
    pub scale: f64,
    pub normalized: ErrorBounds,
    pub raw: ErrorBounds,
    /// Minmax value of `G_n` in raw units of the `n`-stage game.
    pub minmax_readout: f64,
    pub minmax_point: Vec<f64>,
    /// Raw loss the stages after `n` can add.
    pub tail: f64,
    /// `minmax_readout + tail`
    pub minmax_upper_bound: f64,
}

fn bounds_report(res: &SolveResult) -> CliResult<BoundsReport> {
    let (readout, point) = res.minmax_readout()?;
    let upper = res.minmax_upper_bound()?;
    let b = res.bounds;
    let scale = res.normalization.scale;
    Ok(BoundsReport {
        beta: res.game.beta(),
        grid_n: res.grid.n,
        grid_points: res.grid.len(),
        iterations: res.iterations,
        converged: res.converged,
        last_delta: res.deltas.last().copied(),
        next_delta: res.next_delta,
        scale,
        normalized: b,
        raw: ErrorBounds {
            e_upper: b.e_upper / scale,
            d_upper: b.d_upper / scale,
            strategy_d_upper: b.strategy_d_upper / scale,
        },
        minmax_readout: readout,
        minmax_point: point.into_inner(),
        tail: upper - readout,
        minmax_upper_bound: upper,
    })
}

fn run_solve(cli: &Cli, a: &SolveArgs) -> CliResult<Value> {
    let res = solve(&load_game(&a.game)?.vector, a.solver.grid, stopping(&a.solver))?;
    let report = bounds_report(&res)?;
    let raw: Vec<Vec<f64>> = res.raw_vertices()?.into_iter().map(Vec::from).collect();
    write_artifact(&a.out, "solve.json", cli, &res)?;
    write_artifact(&a.out, "bounds.json", cli, &report)?;
    write_text(&a.out, "frontier_raw.csv", &vertices_csv(&raw, Some(&res.grid.points)))?;
    write_text(&a.out, "frontier_normalized.csv", &res.frontier.to_csv())?;
    Ok(serde_json::to_value(&report).expect("report serializes"))
}

fn run_strategy(cli: &Cli, a: &StrategyArgs) -> CliResult<Value> {
    let res = solve_or_load(&a.game, &a.solver, a.from.as_deref())?;
    let s = extract_strategy(&res)?;
    write_artifact(&a.out, "strategy.json", cli, &s)?;
    let max_support = s.modes.iter().flat_map(|m| m.transitions.iter().map(Vec::len)).max().unwrap_or(0);
    Ok(json!({ "modes": s.len(), "k": s.k, "beta": s.beta, "max_transition_support": max_support }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub check: BoundCheck,
    pub sweeps: usize,
    pub last_sweep_delta: f64,
    /// Largest raw coordinate of the guarantee started from the minmax target.
    pub minmax_guarantee: f64,
    pub minmax_guarantee_point: Vec<f64>,
}

fn run_evaluate(cli: &Cli, a: &EvaluateArgs) -> CliResult<Value> {
    let res = solve_or_load(&a.game, &a.solver, a.from.as_deref())?;
    let s = extract_strategy(&res)?;
    let eval = evaluate_strategy(&res.game, &s, a.eval_tol)?;
    let check = bound_check(&res, &eval, a.eval_tol)?;
    let evaluated = s.with_guarantees(&eval.values)?;
    let beta = res.game.beta();
    let k = s.k;
    let mut point = vec![0.0; k];
    for (i, w) in evaluated.initial_modes(&Target::Minmax)? {
        for (x, g) in point.iter_mut().zip(&evaluated.modes[i].guarantee) {
            *x += w * g;
        }
    }
    let raw_point = res.normalization.denormalize(&point, beta, None)?;

    let mut csv = String::from("mode");
    for prefix in ["p", "pi", "fn", "raw"] {
        for c in 1..=k {
            csv.push_str(&format!(",{prefix}{c}"));
        }
    }
    csv.push('\n');
    for (i, (mode, g)) in s.modes.iter().zip(&eval.values).enumerate() {
        let raw = res.normalization.denormalize(g, beta, None)?;
        let cells = mode.p.iter().chain(g.iter()).chain(res.frontier.vertices()[i].iter()).chain(raw.iter());
        csv.push_str(&i.to_string());
        for x in cells {
            csv.push_str(&format!(",{x}"));
        }
        csv.push('\n');
    }
    let report = EvaluationReport {
        check,
        sweeps: eval.iterations,
        last_sweep_delta: eval.delta,
        minmax_guarantee: raw_point.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        minmax_guarantee_point: raw_point.into_inner(),
    };
    write_text(&a.out, "guarantees.csv", &csv)?;
    write_artifact(&a.out, "evaluation.json", cli, &report)?;
    Ok(serde_json::to_value(&report).expect("report serializes"))
}

/// Discount factor for a simulation: the game's when one is given.
fn simulation_beta(game: &GameArgs) -> CliResult<(f64, Option<LoadedGame>)> {
    if game.game.is_some() {
        let g = load_game(game)?;
        Ok((g.vector.beta(), Some(g)))
    } else {
        let beta = game.beta.ok_or_else(|| Failure::config("--beta is required"))?;
        Ok((beta, None))
    }
}

fn forecaster(
    name: &str,
    loaded: Option<&LoadedGame>,
    solver: &SolverArgs,
    sim: &SimulationArgs,
    beta: f64,
) -> CliResult<ForecasterSpec> {
    match name.trim() {
        "ours" => {
            let g = loaded.ok_or_else(|| Failure::config("the ours forecaster needs --game"))?;
            let scalar = g
                .scalar
                .clone()
                .ok_or_else(|| Failure::config("the ours forecaster needs a scalar (experts) game"))?;
            let s = match &sim.strategy {
                Some(path) => read_artifact::<ModeStrategy>(path)?,
                None => extract_strategy(&solve(&g.vector, solver.grid, stopping(solver))?)?,
            };
            if s.beta != beta {
                return Err(Failure::config(format!("strategy was solved at β = {}, simulation uses {beta}", s.beta)));
            }
            let target: Target = sim.target.parse()?;
            let initial = s.initial_modes(&target)?;
            Ok(ForecasterSpec::from_strategy(s, scalar, initial)?)
        }
        "hedge" => Ok(ForecasterSpec::Hedge { eta: sim.eta }),
        other => Ok(other.parse()?),
    }
}

fn run_simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<Value> {
    let (beta, loaded) = simulation_beta(&a.game)?;
    let adversary: Adversary = a.adversary.parse()?;
    let spec = forecaster(&a.forecaster, loaded.as_ref(), &a.solver, &a.sim, beta)?;
    let stats = simulate(&spec, adversary, beta, a.sim.horizon, a.sim.runs, a.sim.seed)?;
    let row = ResultRow::new(spec.name(), adversary, beta, a.sim.seed, a.sim.horizon, &stats);
    write_text(&a.out, "results.csv", &results_csv(std::slice::from_ref(&row)))?;
    write_artifact(&a.out, "results.json", cli, &stats)?;
    Ok(serde_json::to_value(&row).expect("row serializes"))
}

fn run_compare(cli: &Cli, a: &CompareArgs) -> CliResult<Value> {
    let (beta, loaded) = simulation_beta(&a.game)?;
    let adversaries = a.adversaries.split(',').map(str::parse).collect::<Result<Vec<Adversary>, _>>()?;
    let specs = a
        .forecasters
        .split(',')
        .map(|f| forecaster(f, loaded.as_ref(), &a.solver, &a.sim, beta))
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &adversary in &adversaries {
        for spec in &specs {
            let stats = simulate(spec, adversary, beta, a.sim.horizon, a.sim.runs, a.sim.seed)?;
            rows.push(ResultRow::new(spec.name(), adversary, beta, a.sim.seed, a.sim.horizon, &stats));
        }
    }
    write_text(&a.out, "compare.csv", &results_csv(&rows))?;
    write_artifact(&a.out, "compare.json", cli, &rows)?;
    Ok(serde_json::to_value(&rows).expect("rows serialize"))
}

fn run_oracle(cli: &Cli, a: &OracleArgs) -> CliResult<Value> {
    let game = regret_game(&experts_game(2)?, 0.5)?;
    let res = solve(&game, a.solver.grid, stopping(&a.solver))?;
    let report: OracleReport = oracle_check(&res, a.samples, a.directions)?;
    write_artifact(&a.out, "oracle_check.json", cli, &report)?;
    Ok(serde_json::to_value(report).expect("report serializes"))
}

//! Experts-problem forecasters, stochastic adversaries and a Monte-Carlo
//! harness measuring realized discounted regret.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ScalarGame;
use crate::strategy::{sample_index, ModeStrategy};

/// Default Hedge learning rate `√(8 ln K (1-β²))`.
pub fn hedge_eta(k: usize, beta: f64) -> f64 {
    (8.0 * (k as f64).ln() * (1.0 - beta * beta)).sqrt()
}

/// `p_i ∝ exp(-η L_i)`.
pub fn hedge_distribution(losses: &[f64], eta: f64) -> Vec<f64> {
    let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = losses.iter().map(|l| (-eta * (l - lo)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `ξ = (1 - √(1-β²))/β`, with its limit 0 at `β = 0`.
pub fn gps_xi(beta: f64) -> f64 {
    if beta == 0.0 {
        0.0
    } else {
        (1.0 - (1.0 - beta * beta).sqrt()) / beta
    }
}

/// `(leader, laggard)` probabilities for two experts `d` losses apart.
pub fn gps2_distribution(d: u64, beta: f64) -> [f64; 2] {
    let lag = 0.5 * powu(gps_xi(beta), d);
    [1.0 - lag, lag]
}

/// `(leader, second, laggard)` probabilities for three experts.
pub fn gps3_distribution(d12: u64, d13: u64, d23: u64, beta: f64) -> [f64; 3] {
    let xi = gps_xi(beta);
    let a = powu(xi, d12) / 2.0;
    let c = powu(xi, d13 + d23) / 6.0;
    let out = [1.0 - a - c, a - c, 2.0 * c];
    debug_assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));
    out
}

fn powu(x: f64, e: u64) -> f64 {
    if x == 0.0 {
        return if e == 0 { 1.0 } else { 0.0 };
    }
    x.powf(e as f64)
}

/// Experts ordered by cumulative loss, ties to the lower index.
fn ranking(cum: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cum.len()).collect();
    order.sort_by_key(|&i| (cum[i], i));
    order
}

/// GPS distribution over experts indexed as given.
pub fn gps_distribution(cum: &[u64], beta: f64) -> Result<Vec<f64>> {
    let order = ranking(cum);
    let ranked: Vec<f64> = match cum.len() {
        2 => gps2_distribution(cum[order[1]] - cum[order[0]], beta).to_vec(),
        3 => {
            let (l1, l2, l3) = (cum[order[0]], cum[order[1]], cum[order[2]]);
            gps3_distribution(l2 - l1, l3 - l1, l3 - l2, beta).to_vec()
        }
        k => return Err(Error::invalid(format!("GPS is defined for 2 or 3 experts, got {k}"))),
    };
    let mut out = vec![0.0; cum.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = ranked[rank];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Adversary {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Adversary {
    pub const ALL: [Adversary; 6] = [Adversary::A, Adversary::B, Adversary::C, Adversary::D, Adversary::E, Adversary::F];

    /// Number of experts the adversary plays against.
    pub fn experts(self) -> usize {
        match self {
            Adversary::A | Adversary::B | Adversary::C => 2,
            Adversary::D | Adversary::E | Adversary::F => 3,
        }
    }

    /// Rejects discount factors where the Bernoulli gap `1/2 - √(1-β)` is negative.
    pub fn check(self, k: usize, beta: f64) -> Result<()> {
        if k != self.experts() {
            return Err(Error::invalid(format!("adversary {self} needs {} experts, got {k}", self.experts())));
        }
        if matches!(self, Adversary::B | Adversary::F) && bernoulli_gap(beta) < 0.0 {
            return Err(Error::invalid(format!("adversary {self} needs β ≥ 0.75, got {beta}")));
        }
        Ok(())
    }

    /// Loss vector over experts at stage `t` (from 1), given cumulative
    /// undiscounted expert losses so far.
    pub fn sample<R: Rng + ?Sized>(self, t: usize, cum: &[u64], beta: f64, rng: &mut R) -> Vec<f64> {
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            Adversary::A => {
                if rng.gen_bool(0.5) {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                }
            }
            Adversary::B => {
                let first = rng.gen_bool(bernoulli_gap(beta));
                vec![bit(first), bit(rng.gen_bool(0.5))]
            }
            Adversary::C => {
                let q = if t % 2 == 1 { 0.9f64.powf(1.0 / t as f64) } else { 0.9f64.powi(t as i32) };
                if rng.gen_bool(q) {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                }
            }
            Adversary::D => {
                const COLUMNS: [[f64; 3]; 6] = [
                    [1.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0],
                    [0.0, 0.0, 1.0],
                    [1.0, 1.0, 0.0],
                    [1.0, 0.0, 1.0],
                    [0.0, 1.0, 1.0],
                ];
                COLUMNS[rng.gen_range(0..6)].to_vec()
            }
            Adversary::E => {
                let order = ranking(cum);
                if cum[order[0]] == cum[order[2]] {
                    let spared = rng.gen_range(0..3);
                    (0..3).map(|i| bit(i != spared)).collect()
                } else {
                    let leader = order[0];
                    let spare_leader = rng.gen_bool(0.5);
                    (0..3).map(|i| bit((i == leader) != spare_leader)).collect()
                }
            }
            Adversary::F => {
                let first = rng.gen_bool(bernoulli_gap(beta));
                vec![bit(first), bit(rng.gen_bool(0.5)), bit(rng.gen_bool(0.5))]
            }
        }
    }
}

fn bernoulli_gap(beta: f64) -> f64 {
    0.5 - (1.0 - beta).sqrt()
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Adversary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Adversary::A),
            "B" => Ok(Adversary::B),
            "C" => Ok(Adversary::C),
            "D" => Ok(Adversary::D),
            "E" => Ok(Adversary::E),
            "F" => Ok(Adversary::F),
            _ => Err(Error::invalid(format!("unknown adversary {s:?}; expected one of A-F"))),
        }
    }
}

/// A forecaster configuration; each run starts a fresh state from it.
#[derive(Debug, Clone)]
pub enum ForecasterSpec {
    /// Exponential weights on discounted cumulative losses; `None` uses [`hedge_eta`].
    Hedge { eta: Option<f64> },
    Gps,
    /// A mode strategy solved on the regret game of `game`, started from a
    /// randomization over modes.
    Strategy { strategy: Arc<ModeStrategy>, game: Arc<ScalarGame>, initial: Vec<(usize, f64)> },
}

impl ForecasterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ForecasterSpec::Hedge { .. } => "hedge",
            ForecasterSpec::Gps => "gps",
            ForecasterSpec::Strategy { .. } => "ours",
        }
    }

    /// Wraps a mode strategy for the scalar game it was solved from.
    pub fn from_strategy(strategy: ModeStrategy, game: ScalarGame, initial: Vec<(usize, f64)>) -> Result<Self> {
        if strategy.k != game.m() || strategy.num_actions() != game.m() || strategy.num_adversary_actions() != game.n() {
            return Err(Error::invalid("strategy does not belong to the regret game of this scalar game"));
        }
        if initial.is_empty() || initial.iter().any(|&(i, w)| i >= strategy.len() || !(w >= 0.0)) {
            return Err(Error::invalid("initial mode weights are invalid"));
        }
        Ok(ForecasterSpec::Strategy { strategy: Arc::new(strategy), game: Arc::new(game), initial })
    }

    pub fn start<R: Rng + ?Sized>(&self, k: usize, beta: f64, rng: &mut R) -> Result<ForecasterState> {
        Ok(match self {
            ForecasterSpec::Hedge { eta } => ForecasterState::Hedge {
                eta: eta.unwrap_or_else(|| hedge_eta(k, beta)),
                beta,
                weight: 1.0,
                losses: vec![0.0; k],
            },
            ForecasterSpec::Gps => {
                if !(2..=3).contains(&k) {
                    return Err(Error::invalid(format!("GPS is defined for 2 or 3 experts, got {k}")));
                }
                ForecasterState::Gps { beta, cum: vec![0; k] }
            }
            ForecasterSpec::Strategy { strategy, game, initial } => {
                if game.m() != k {
                    return Err(Error::invalid(format!("strategy has {} experts, adversary {k}", game.m())));
                }
                let mode = initial[sample_index(initial.iter().map(|x| x.1), rng)].0;
                ForecasterState::Strategy { strategy: strategy.clone(), game: game.clone(), mode }
            }
        })
    }
}

impl FromStr for ForecasterSpec {
    type Err = Error;
    /// Parses `hedge` or `gps`; strategies are built with [`ForecasterSpec::from_strategy`].
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hedge" => Ok(ForecasterSpec::Hedge { eta: None }),
            "gps" => Ok(ForecasterSpec::Gps),
            other => Err(Error::invalid(format!("unknown forecaster {other:?}"))),
        }
    }
}

/// Running state of one forecaster.
#[derive(Debug, Clone)]
pub enum ForecasterState {
    Hedge { eta: f64, beta: f64, weight: f64, losses: Vec<f64> },
    Gps { beta: f64, cum: Vec<u64> },
    Strategy { strategy: Arc<ModeStrategy>, game: Arc<ScalarGame>, mode: usize },
}

impl ForecasterState {
    /// Distribution over experts for the coming stage.
    pub fn distribution(&self) -> Result<Vec<f64>> {
        match self {
            ForecasterState::Hedge { eta, losses, .. } => Ok(hedge_distribution(losses, *eta)),
            ForecasterState::Gps { beta, cum } => gps_distribution(cum, *beta),
            ForecasterState::Strategy { strategy, mode, .. } => Ok(strategy.modes[*mode].alpha.clone()),
        }
    }

    /// Samples the expert to follow.
    pub fn act<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        match self {
            ForecasterState::Strategy { strategy, mode, .. } => strategy.step(*mode, rng),
            _ => Ok(sample_index(self.distribution()?.into_iter(), rng)),
        }
    }

    /// Feeds the stage's expert losses. Strategy modes stay put on constant
    /// outcomes, which carry no regret information.
    pub fn update<R: Rng + ?Sized>(&mut self, outcome: &[f64], rng: &mut R) -> Result<()> {
        match self {
            ForecasterState::Hedge { beta, weight, losses, .. } => {
                for (l, x) in losses.iter_mut().zip(outcome) {
                    *l += *weight * x;
                }
                *weight *= *beta;
            }
            ForecasterState::Gps { cum, .. } => {
                for (c, &x) in cum.iter_mut().zip(outcome) {
                    *c += x as u64;
                }
            }
            ForecasterState::Strategy { strategy, game, mode } => {
                if outcome.iter().all(|&x| x == outcome[0]) {
                    return Ok(());
                }
                let b = game
                    .column_of(outcome)
                    .ok_or_else(|| Error::invalid(format!("outcome {outcome:?} is not a column of the game")))?;
                *mode = strategy.observe(*mode, b, rng)?;
            }
        }
        Ok(())
    }
}

/// Monte-Carlo estimate of expected discounted regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runs: usize,
    pub regrets: Vec<f64>,
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// `1.96·se`
    pub half_width: f64,
}

impl RunStats {
    pub fn from_regrets(regrets: Vec<f64>) -> Result<Self> {
        let runs = regrets.len();
        if runs == 0 {
            return Err(Error::Empty("runs"));
        }
        let mean = regrets.iter().sum::<f64>() / runs as f64;
        let se = if runs > 1 {
            let var = regrets.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (runs - 1) as f64;
            (var / runs as f64).sqrt()
        } else {
            0.0
        };
        Ok(RunStats { runs, regrets, mean, se, half_width: 1.96 * se })
    }
}

/// Per-run random streams: adversary, action draws, mode transitions.
pub fn run_rngs(seed: u64, run: usize) -> [ChaCha8Rng; 3] {
    std::array::from_fn(|j| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3 * run as u64 + j as u64);
        rng
    })
}

/// Realized discounted regret of one run.
pub fn run_once(
    spec: &ForecasterSpec,
    adversary: Adversary,
    beta: f64,
    horizon: usize,
    seed: u64,
    run: usize,
) -> Result<f64> {
    let k = adversary.experts();
    let [mut adv_rng, mut act_rng, mut own_rng] = run_rngs(seed, run);
    let mut state = spec.start(k, beta, &mut own_rng)?;
    let mut cum = vec![0u64; k];
    let mut expert_loss = vec![0.0; k];
    let mut own_loss = 0.0;
    let mut weight = 1.0;
    for t in 1..=horizon {
        let outcome = adversary.sample(t, &cum, beta, &mut adv_rng);
        let a = state.act(&mut act_rng)?;
        own_loss += weight * outcome[a];
        for i in 0..k {
            expert_loss[i] += weight * outcome[i];
            cum[i] += outcome[i] as u64;
        }
        state.update(&outcome, &mut own_rng)?;
        weight *= beta;
    }
    Ok(own_loss - expert_loss.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Averages realized discounted regret over `runs` independent runs.
/// Results depend only on the arguments, not on thread scheduling.
pub fn simulate(
    spec: &ForecasterSpec,
    adversary: Adversary,
    beta: f64,
    horizon: usize,
    runs: usize,
    seed: u64,
) -> Result<RunStats> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("discount factor must lie in [0, 1), got {beta}")));
    }
    if horizon == 0 || runs == 0 {
        return Err(Error::invalid("horizon and runs must be at least 1"));
    }
    adversary.check(adversary.experts(), beta)?;
    let regrets = (0..runs)
        .into_par_iter()
        .map(|r| run_once(spec, adversary, beta, horizon, seed, r))
        .collect::<Result<Vec<_>>>()?;
    RunStats::from_regrets(regrets)
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub forecaster: String,
    pub adversary: Adversary,
    pub beta: f64,
    pub seed: u64,
    pub mean: f64,
    pub se: f64,
    pub ci: f64,
    pub runs: usize,
    pub horizon: usize,
}

impl ResultRow {
    pub fn new(forecaster: &str, adversary: Adversary, beta: f64, seed: u64, horizon: usize, stats: &RunStats) -> Self {
        ResultRow {
            forecaster: forecaster.to_string(),
            adversary,
            beta,
            seed,
            mean: stats.mean,
            se: stats.se,
            ci: stats.half_width,
            runs: stats.runs,
            horizon,
        }
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("forecaster,adversary,beta,seed,mean,se,ci,runs,horizon\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.forecaster, r.adversary, r.beta, r.seed, r.mean, r.se, r.ci, r.runs, r.horizon
        ));
    }
    out
}

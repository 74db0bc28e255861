//! Finite-mode strategies read off a solved frontier.
//!
//! Each grid direction becomes a mode. In mode `p` the player draws an
//! action from `α*(p)`; after seeing the adversary's action `b` it moves to
//! a random mode whose guarantees average to the continuation point
//! `Q*(b, p)`. The player's own realized action never enters the transition.

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{aumann_select, raw_minmax_offset, validate_distribution, NormalizationRecord, VectorGame};
use crate::geometry::{frontier_intersect, line_intersect, Frontier, LossVector, ParamPoint};
use crate::lp::{solve_min, LinearProgram, Relation};
use crate::solver::{SolveResult, NORMALIZED_TOL};

/// Tolerance on probability vectors stored in a strategy.
pub const DIST_TOL: f64 = 1e-9;

/// Default policy-evaluation tolerance, normalized units.
pub const EVAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `transitions[b]` lists `(next mode, weight)`.
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Guarantee vector of the mode, normalized units.
    pub guarantee: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategyFile")]
pub struct ModeStrategy {
    pub k: usize,
    pub beta: f64,
    pub grid_n: usize,
    pub modes: Vec<Mode>,
    pub normalization: NormalizationRecord,
}

#[derive(Deserialize)]
struct StrategyFile {
    k: usize,
    beta: f64,
    grid_n: usize,
    modes: Vec<Mode>,
    normalization: NormalizationRecord,
}

impl TryFrom<StrategyFile> for ModeStrategy {
    type Error = Error;
    fn try_from(f: StrategyFile) -> Result<Self> {
        let s = ModeStrategy { k: f.k, beta: f.beta, grid_n: f.grid_n, modes: f.modes, normalization: f.normalization };
        s.validate()?;
        Ok(s)
    }
}

fn check_dist(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|&x| !(-DIST_TOL..=1.0 + DIST_TOL).contains(&x)) {
        return Err(Error::invalid(format!("{what} has a weight outside [0, 1]")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > DIST_TOL {
        return Err(Error::invalid(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl ModeStrategy {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn num_actions(&self) -> usize {
        self.modes.first().map_or(0, |m| m.alpha.len())
    }

    pub fn num_adversary_actions(&self) -> usize {
        self.modes.first().map_or(0, |m| m.transitions.len())
    }

    /// Checks distributions, indices and the `K+1` support bound.
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Empty("strategy modes"));
        }
        let (m, n) = (self.num_actions(), self.num_adversary_actions());
        for (i, mode) in self.modes.iter().enumerate() {
            if mode.alpha.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: mode.alpha.len() });
            }
            if mode.transitions.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: mode.transitions.len() });
            }
            if mode.p.len() != self.k || mode.guarantee.len() != self.k {
                return Err(Error::DimensionMismatch { expected: self.k, found: mode.p.len() });
            }
            check_dist(&mode.alpha, &format!("action distribution of mode {i}"))?;
            for (b, tr) in mode.transitions.iter().enumerate() {
                if tr.len() > self.k + 1 {
                    return Err(Error::invalid(format!("mode {i}, action {b}: {} transitions exceed K+1", tr.len())));
                }
                if let Some(&(j, _)) = tr.iter().find(|(j, _)| *j >= self.modes.len()) {
                    return Err(Error::invalid(format!("mode {i}, action {b}: next mode {j} does not exist")));
                }
                let w: Vec<f64> = tr.iter().map(|x| x.1).collect();
                check_dist(&w, &format!("transition of mode {i} on action {b}"))?;
            }
        }
        Ok(())
    }

    /// Guarantee vectors as a frontier tagged by mode direction.
    pub fn guarantee_frontier(&self) -> Result<Frontier> {
        let vertices = self.modes.iter().map(|m| LossVector::new(m.guarantee.clone())).collect::<Result<_>>()?;
        let params = self.modes.iter().map(|m| ParamPoint::new(m.p.clone())).collect::<Result<_>>()?;
        Frontier::with_params(vertices, params)
    }

    /// Copy with per-mode guarantees replaced, e.g. by evaluated ones.
    pub fn with_guarantees(&self, values: &[LossVector]) -> Result<ModeStrategy> {
        if values.len() != self.modes.len() {
            return Err(Error::DimensionMismatch { expected: self.modes.len(), found: values.len() });
        }
        let mut out = self.clone();
        for (m, v) in out.modes.iter_mut().zip(values) {
            m.guarantee = v.to_vec();
        }
        Ok(out)
    }

    fn mode(&self, mode: usize) -> Result<&Mode> {
        self.modes
            .get(mode)
            .ok_or_else(|| Error::invalid(format!("mode {mode} out of range (strategy has {})", self.modes.len())))
    }

    /// Draws an action from the mode's distribution.
    pub fn step<R: Rng + ?Sized>(&self, mode: usize, rng: &mut R) -> Result<usize> {
        let m = self.mode(mode)?;
        Ok(sample_index(m.alpha.iter().copied(), rng))
    }

    /// Draws the next mode after the adversary played `b`.
    pub fn observe<R: Rng + ?Sized>(&self, mode: usize, b: usize, rng: &mut R) -> Result<usize> {
        let tr = self
            .mode(mode)?
            .transitions
            .get(b)
            .ok_or_else(|| Error::invalid(format!("adversary action {b} out of range")))?;
        Ok(tr[sample_index(tr.iter().map(|x| x.1), rng)].0)
    }

    /// Starting randomization over modes for a target point of the
    /// guarantee frontier.
    pub fn initial_modes(&self, target: &Target) -> Result<Vec<(usize, f64)>> {
        let frontier = self.guarantee_frontier()?;
        let weights = match target {
            Target::Minmax => {
                let offset = raw_minmax_offset(&self.normalization, self.beta, None)?;
                line_intersect(&offset, &frontier)?.weights
            }
            Target::Prior(prior) => vec![(aumann_select(&frontier, prior)?.0, 1.0)],
            Target::Param(coords) => {
                let p = ParamPoint::new(coords.clone())?;
                let hit = frontier_intersect(&p, &frontier)?;
                let tagged = self.modes.iter().position(|m| m.p == *coords);
                match tagged {
                    Some(i) if self.modes[i].guarantee.iter().zip(hit.point.iter()).all(|(g, x)| *g <= x + 1e-9) => {
                        vec![(i, 1.0)]
                    }
                    _ => hit.weights,
                }
            }
        };
        Ok(normalize_support(weights))
    }
}

fn normalize_support(mut w: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    w.retain(|x| x.1 > 0.0);
    let total: f64 = w.iter().map(|x| x.1).sum();
    w.iter_mut().for_each(|x| x.1 /= total);
    w.sort_by_key(|x| x.0);
    w
}

/// Index drawn with probability proportional to its weight.
pub fn sample_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        if u < w {
            return i;
        }
        u -= w;
        last = i;
    }
    last
}

/// Where a run of the strategy starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Smallest largest raw coordinate.
    Minmax,
    /// Smallest prior-weighted loss.
    Prior(Vec<f64>),
    /// Intersection with the line through a direction.
    Param(Vec<f64>),
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse_list = |body: &str| -> Result<Vec<f64>> {
            body.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number {x:?}: {e}"))))
                .collect()
        };
        if s == "minmax" {
            Ok(Target::Minmax)
        } else if let Some(body) = s.strip_prefix("prior:") {
            let w = parse_list(body)?;
            validate_distribution(&w, "prior")?;
            Ok(Target::Prior(w))
        } else if let Some(body) = s.strip_prefix("param:") {
            let p = parse_list(body)?;
            ParamPoint::new(p.clone())?;
            Ok(Target::Param(p))
        } else {
            Err(Error::invalid(format!("unknown target {s:?}; expected minmax, prior:w1,... or param:p1,...")))
        }
    }
}

/// Basic convex weights over `candidates` reproducing `point`.
pub fn decompose(point: &[f64], frontier: &Frontier, candidates: &[usize]) -> Result<Vec<(usize, f64)>> {
    let k = frontier.dim();
    if point.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: point.len() });
    }
    let verts = frontier.vertices();
    let mut lp = LinearProgram::new(candidates.len());
    for c in 0..k {
        let row = candidates
            .iter()
            .enumerate()
            .filter(|(_, &j)| verts[j][c] != 0.0)
            .map(|(jj, &j)| (jj, verts[j][c]))
            .collect();
        lp.add_sparse_constraint(row, Relation::Eq, point[c]);
    }
    lp.add_sparse_constraint((0..candidates.len()).map(|jj| (jj, 1.0)).collect(), Relation::Eq, 1.0);
    let sol = solve_min(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Numeric {
            direction: point.to_vec(),
            reason: "continuation point is outside the hull of the frontier".into(),
        });
    }
    let w = sol.primal.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(jj, &w)| (candidates[jj], w)).collect();
    Ok(normalize_support(w))
}

fn transitions_for(frontier: &Frontier, q: &[f64], support: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    let k = frontier.dim();
    if support.len() <= k + 1 {
        return Ok(normalize_support(support.to_vec()));
    }
    let candidates: Vec<usize> = support.iter().map(|x| x.0).collect();
    match decompose(q, frontier, &candidates) {
        Ok(w) => Ok(w),
        Err(_) => decompose(q, frontier, &(0..frontier.len()).collect::<Vec<_>>()),
    }
}

/// Builds the automaton from the last step of a solve: mode `p` plays
/// `α*(p)` and, after `b`, moves to modes whose `G_n` vertices average to
/// `Q*(b, p)`. Guarantees start at `F^{n+1}(p)`.
pub fn extract_strategy(res: &SolveResult) -> Result<ModeStrategy> {
    let frontier = &res.frontier;
    let modes = res
        .solutions
        .par_iter()
        .zip(res.grid.points.par_iter())
        .map(|(sol, p)| {
            let transitions = sol
                .q
                .iter()
                .zip(&sol.q_weights)
                .map(|(q, w)| transitions_for(frontier, q, w))
                .collect::<Result<_>>()?;
            Ok(Mode {
                p: p.to_vec(),
                alpha: sol.alpha.clone(),
                transitions,
                guarantee: p.iter().map(|x| sol.t + x).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let s = ModeStrategy {
        k: res.game.k(),
        beta: res.game.beta(),
        grid_n: res.grid.n,
        modes,
        normalization: res.normalization.clone(),
    };
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    /// Fixed-point guarantee `F^π(p)` per mode, normalized units.
    pub values: Vec<LossVector>,
    pub iterations: usize,
    /// Last sup-norm change between sweeps.
    pub delta: f64,
}

const EVAL_MAX_SWEEPS: usize = 10_000_000;

/// Exact guarantees of a strategy: Jacobi iteration of the policy operator
/// from zero until the sweep change is at most `tol·(1-β)`, which puts the
/// result within `tol` of the fixed point.
pub fn evaluate_strategy(g: &VectorGame, s: &ModeStrategy, tol: f64) -> Result<EvaluationResult> {
    if !g.is_normalized(NORMALIZED_TOL) {
        return Err(Error::NotNormalized("policy evaluation needs the normalized game".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    s.validate()?;
    if s.k != g.k() || s.num_actions() != g.m() || s.num_adversary_actions() != g.n() {
        return Err(Error::invalid("strategy and game dimensions disagree"));
    }
    let (k, n, beta) = (g.k(), g.n(), g.beta());
    // expected stage loss of each mode against each adversary action
    let stage: Vec<Vec<f64>> = s
        .modes
        .iter()
        .map(|mode| {
            let mut out = vec![0.0; n * k];
            for b in 0..n {
                for (a, w) in mode.alpha.iter().enumerate() {
                    for (c, r) in g.loss(a, b).iter().enumerate() {
                        out[b * k + c] += w * r;
                    }
                }
            }
            out
        })
        .collect();
    let mut f = vec![vec![0.0; k]; s.len()];
    let mut iterations = 0;
    loop {
        let next: Vec<Vec<f64>> = s
            .modes
            .par_iter()
            .zip(stage.par_iter())
            .map(|(mode, st)| {
                let mut out = vec![f64::NEG_INFINITY; k];
                for (b, tr) in mode.transitions.iter().enumerate() {
                    for c in 0..k {
                        let cont: f64 = tr.iter().map(|&(j, w)| w * f[j][c]).sum();
                        out[c] = out[c].max(st[b * k + c] + beta * cont);
                    }
                }
                out
            })
            .collect();
        let delta = next
            .iter()
            .zip(&f)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        f = next;
        iterations += 1;
        if delta <= tol * (1.0 - beta) {
            let values = f.into_iter().map(LossVector::new).collect::<Result<_>>()?;
            return Ok(EvaluationResult { values, iterations, delta });
        }
        if iterations >= EVAL_MAX_SWEEPS {
            return Err(Error::Numeric {
                direction: Vec::new(),
                reason: format!("policy evaluation did not settle after {iterations} sweeps"),
            });
        }
    }
}

/// Comparison of a strategy's exact guarantees with the solve it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `max_p ‖F^π(p) - F^n(p)‖_∞`
    pub two_sided: f64,
    /// `max_p max_k (F^π_k(p) - F^n_k(p))⁺`: how far the strategy falls short.
    pub shortfall: f64,
    /// `‖F^{n+1} - F^n‖/(1-β)`
    pub bound: f64,
    /// A-priori distance bound between the strategy's frontier and the optimum.
    pub a_priori: f64,
    /// Policy-evaluation tolerance added to `bound`.
    pub slack: f64,
    pub pass: bool,
}

/// Checks `‖(F^π - F^n)⁺‖ ≤ ‖F^{n+1} - F^n‖/(1-β)` in normalized units.
pub fn bound_check(res: &SolveResult, eval: &EvaluationResult, tol: f64) -> Result<BoundCheck> {
    let verts = res.frontier.vertices();
    if eval.values.len() != verts.len() {
        return Err(Error::DimensionMismatch { expected: verts.len(), found: eval.values.len() });
    }
    let mut two_sided = 0.0f64;
    let mut shortfall = 0.0f64;
    for (f, g) in eval.values.iter().zip(verts) {
        for (x, y) in f.iter().zip(g.iter()) {
            two_sided = two_sided.max((x - y).abs());
            shortfall = shortfall.max(x - y);
        }
    }
    let bound = res.next_delta / (1.0 - res.game.beta());
    Ok(BoundCheck {
        two_sided,
        shortfall,
        bound,
        a_priori: res.bounds.strategy_d_upper,
        slack: tol,
        pass: shortfall <= bound + tol,
    })
}

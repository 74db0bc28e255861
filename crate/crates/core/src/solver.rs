//! Set-valued value iteration over polytope frontiers.
//!
//! One step maps a frontier `V` of continuation guarantees to the frontier
//! of one-stage guarantees: along each grid line `t·1 + p` it finds the
//! smallest `t` reachable by a mixed action `α` and continuation points
//! `Q(b)` in the hull of `V`, one per adversary action. That is one linear
//! program per direction, solved independently and in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{horizon_weight, normalize, raw_minmax, NormalizationRecord, VectorGame};
use crate::geometry::{
    d_distance, d_distance_exact, essential_vertices, gamma_approx, param_grid, Frontier, LossVector, ParamGrid, ParamPoint,
};
use crate::lp::{solve_min, LinearProgram, Relation};

/// Vertices this close to the upset of the others are dropped before a step.
pub const ESSENTIAL_TOL: f64 = 1e-9;

/// Tolerance used when checking that a game is normalized.
pub const NORMALIZED_TOL: f64 = 1e-12;

/// `(max_b Σ_a α_a r_k(a,b) + β Q_k(b))_k`
pub fn guarantee_vector(g: &VectorGame, alpha: &[f64], q: &[Vec<f64>]) -> Result<LossVector> {
    if alpha.len() != g.m() {
        return Err(Error::DimensionMismatch { expected: g.m(), found: alpha.len() });
    }
    if q.len() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), found: q.len() });
    }
    let k = g.k();
    let mut out = vec![f64::NEG_INFINITY; k];
    for (b, qb) in q.iter().enumerate() {
        if qb.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: qb.len() });
        }
        for c in 0..k {
            let stage: f64 = alpha.iter().enumerate().map(|(a, w)| w * g.loss(a, b)[c]).sum();
            out[c] = out[c].max(stage + g.beta() * qb[c]);
        }
    }
    LossVector::new(out)
}

/// Optimal solution of one direction's program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSolution {
    pub t: f64,
    /// Mixed action `α*`.
    pub alpha: Vec<f64>,
    /// Continuation point `Q*(b)` per adversary action.
    pub q: Vec<Vec<f64>>,
    /// Convex weights `(vertex index, weight)` producing each `Q*(b)`.
    pub q_weights: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub frontier: Frontier,
    pub solutions: Vec<StepSolution>,
}

fn require_normalized(g: &VectorGame) -> Result<()> {
    if !g.is_normalized(NORMALIZED_TOL) {
        return Err(Error::NotNormalized(format!(
            "stage losses must lie in [0, {}]; normalize the game first",
            1.0 - g.beta()
        )));
    }
    Ok(())
}

/// Clamps LP noise off a weight vector and rescales it to sum to one.
fn clean_weights(w: &mut [f64]) {
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    }
}

fn solve_direction(g: &VectorGame, v: &Frontier, cols: &[usize], p: &ParamPoint) -> Result<StepSolution> {
    let (m, n, k) = (g.m(), g.n(), g.k());
    let nc = cols.len();
    let w0 = 1 + m;
    let mut lp = LinearProgram::new(w0 + n * nc);
    lp.set_free(0);
    lp.set_objective_coeff(0, 1.0);
    let verts = v.vertices();
    for b in 0..n {
        for c in 0..k {
            let mut row = Vec::with_capacity(1 + m + nc);
            row.push((0, -1.0));
            for a in 0..m {
                let r = g.loss(a, b)[c];
                if r != 0.0 {
                    row.push((1 + a, r));
                }
            }
            for (jj, &j) in cols.iter().enumerate() {
                let x = verts[j][c];
                if x != 0.0 {
                    row.push((w0 + b * nc + jj, g.beta() * x));
                }
            }
            lp.add_sparse_constraint(row, Relation::Le, p[c]);
        }
    }
    lp.add_sparse_constraint((1..=m).map(|a| (a, 1.0)).collect(), Relation::Eq, 1.0);
    for b in 0..n {
        lp.add_sparse_constraint((0..nc).map(|jj| (w0 + b * nc + jj, 1.0)).collect(), Relation::Eq, 1.0);
    }
    let sol = solve_min(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Numeric {
            direction: p.to_vec(),
            reason: format!("one-step program ended {:?}", sol.status),
        });
    }
    let mut alpha = sol.primal[1..=m].to_vec();
    clean_weights(&mut alpha);
    let mut q = Vec::with_capacity(n);
    let mut q_weights = Vec::with_capacity(n);
    for b in 0..n {
        let mut wb = sol.primal[w0 + b * nc..w0 + (b + 1) * nc].to_vec();
        clean_weights(&mut wb);
        let support: Vec<(usize, f64)> =
            wb.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(jj, &w)| (cols[jj], w)).collect();
        let mut qb = vec![0.0; k];
        for &(j, w) in &support {
            for (acc, x) in qb.iter_mut().zip(verts[j].iter()) {
                *acc += w * x;
            }
        }
        q.push(qb);
        q_weights.push(support);
    }
    Ok(StepSolution { t: sol.primal[0], alpha, q, q_weights })
}

/// One application of the grid-approximated Bellman operator to `v`.
///
/// Vertex `i` of the returned frontier is `t*(p_i)·1 + p_i`, kept even when
/// dominated so that vertices and grid points stay aligned.
pub fn dp_step(g: &VectorGame, v: &Frontier, grid: &ParamGrid) -> Result<StepResult> {
    require_normalized(g)?;
    if v.dim() != g.k() || grid.k != g.k() {
        return Err(Error::DimensionMismatch { expected: g.k(), found: v.dim() });
    }
    // Only the upset of the hull matters, so vertices inside it are left out;
    // near-coplanar leftovers make the programs badly conditioned.
    let cols = essential_vertices(v, ESSENTIAL_TOL)?;
    let solutions: Vec<StepSolution> = grid
        .points
        .par_iter()
        .map(|p| solve_direction(g, v, &cols, p))
        .collect::<Result<_>>()?;
    let vertices = solutions
        .iter()
        .zip(&grid.points)
        .map(|(s, p)| LossVector::new(p.iter().map(|x| s.t + x).collect()))
        .collect::<Result<_>>()?;
    let frontier = Frontier::with_params(vertices, grid.points.clone())?;
    Ok(StepResult { frontier, solutions })
}

/// A-priori error bounds in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// Bound on `e(G_n, V*)`.
    pub e_upper: f64,
    /// Bound on `d(G_n, V*)`.
    pub d_upper: f64,
    /// Bound on the distance between the extracted strategy's frontier and `V*`.
    pub strategy_d_upper: f64,
}

pub fn error_bounds(grid_n: usize, iterations: usize, beta: f64) -> ErrorBounds {
    let bn = beta.powi(iterations as i32);
    let h = 1.0 / grid_n as f64;
    let d_upper = h * (1.0 - bn) / (1.0 - beta) + bn;
    let strategy_d_upper = d_upper + bn + h * (2.0 - bn - bn * beta) / ((1.0 - beta) * (1.0 - beta));
    ErrorBounds { e_upper: bn, d_upper, strategy_d_upper }
}

/// Raw-unit tail of stages after `iterations`: `β^n/(1-β)·max_loss`.
pub fn tail_bound(beta: f64, iterations: usize, max_loss: f64) -> f64 {
    beta.powi(iterations as i32) / (1.0 - beta) * max_loss
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    /// Exactly this many steps.
    Iterations(usize),
    /// Until consecutive iterates differ by at most `tol`, capped at `max_iterations`.
    Tolerance { tol: f64, max_iterations: usize },
}

/// Outcome of value iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Normalized game that was solved.
    pub game: VectorGame,
    /// Map from the raw game to `game`.
    pub normalization: NormalizationRecord,
    pub grid: ParamGrid,
    /// `G_n`
    pub frontier: Frontier,
    /// `‖F^{i+1} - F^i‖` for `i < n`.
    pub deltas: Vec<f64>,
    pub iterations: usize,
    /// One more step from `G_n`: `α*`, `Q*` and `t*` per direction.
    pub solutions: Vec<StepSolution>,
    /// `‖F^{n+1} - F^n‖`
    pub next_delta: f64,
    pub bounds: ErrorBounds,
    /// Whether a tolerance stop was reached (always true for fixed counts).
    pub converged: bool,
}

impl SolveResult {
    /// `F^{n+1}` as a frontier aligned with the grid.
    pub fn next_frontier(&self) -> Result<Frontier> {
        let vertices = self
            .solutions
            .iter()
            .zip(&self.grid.points)
            .map(|(s, p)| LossVector::new(p.iter().map(|x| s.t + x).collect()))
            .collect::<Result<_>>()?;
        Frontier::with_params(vertices, self.grid.points.clone())
    }

    /// Minmax readout of `G_n` in raw units of the `n`-stage game.
    pub fn minmax_readout(&self) -> Result<(f64, LossVector)> {
        let (value, point, _) =
            raw_minmax(&self.frontier, &self.normalization, self.game.beta(), Some(self.iterations))?;
        Ok((value, point))
    }

    /// Raw frontier `G_n`, one vertex per grid direction.
    pub fn raw_vertices(&self) -> Result<Vec<LossVector>> {
        self.frontier
            .vertices()
            .iter()
            .map(|v| self.normalization.denormalize(v, self.game.beta(), Some(self.iterations)))
            .collect()
    }

    /// Largest raw stage loss over all components.
    pub fn max_raw_loss(&self) -> f64 {
        let g = &self.game;
        let mut hi = f64::NEG_INFINITY;
        for a in 0..g.m() {
            for b in 0..g.n() {
                for (x, c) in g.loss(a, b).iter().zip(&self.normalization.shifts) {
                    hi = hi.max((x - c) / self.normalization.scale);
                }
            }
        }
        hi
    }

    /// Raw bound on the infinite-horizon minmax value: readout plus the
    /// largest possible loss over the truncated tail.
    pub fn minmax_upper_bound(&self) -> Result<f64> {
        let (value, _) = self.minmax_readout()?;
        Ok(value + tail_bound(self.game.beta(), self.iterations, self.max_raw_loss().max(0.0)))
    }

    /// Normalized `t`-values of `G_n` along the grid.
    pub fn t_values(&self) -> Vec<f64> {
        self.frontier.vertices().iter().zip(&self.grid.points).map(|(v, p)| v[0] - p[0]).collect()
    }

    /// Raw-unit scale of a normalized distance.
    pub fn raw_distance(&self, normalized: f64) -> f64 {
        normalized / self.normalization.scale
    }

    /// Horizon weight `Σ_{t<n} β^t` of the iterate.
    pub fn horizon(&self) -> f64 {
        horizon_weight(self.game.beta(), Some(self.iterations))
    }
}

fn sup_delta(a: &[StepSolution], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (s, t)| acc.max((s.t - t).abs()))
}

/// Value iteration from `G_0 = {0}` on a normalized game.
pub fn value_iteration(g: &VectorGame, grid_n: usize, stop: Stopping) -> Result<SolveResult> {
    require_normalized(g)?;
    let grid = param_grid(g.k(), grid_n)?;
    let (target, tol) = match stop {
        Stopping::Iterations(n) => (n, None),
        Stopping::Tolerance { tol, max_iterations } => {
            if !(tol > 0.0) {
                return Err(Error::invalid(format!("stopping tolerance must be positive, got {tol}")));
            }
            (max_iterations, Some(tol))
        }
    };
    // {0} seen through the grid: every line meets its upset at t = 0.
    let mut frontier = gamma_approx(&Frontier::origin(g.k()), &grid)?;
    let mut t_prev = vec![0.0; grid.len()];
    let mut deltas = Vec::new();
    let mut converged = tol.is_none();
    let mut step = dp_step(g, &frontier, &grid)?;
    while deltas.len() < target {
        if let Some(tol) = tol {
            if deltas.last().is_some_and(|&d| d <= tol) {
                converged = true;
                break;
            }
        }
        deltas.push(sup_delta(&step.solutions, &t_prev));
        t_prev = step.solutions.iter().map(|s| s.t).collect();
        frontier = step.frontier;
        step = dp_step(g, &frontier, &grid)?;
    }
    if let Some(tol) = tol {
        converged = converged || deltas.last().is_some_and(|&d| d <= tol);
    }
    let iterations = deltas.len();
    let next_delta = sup_delta(&step.solutions, &t_prev);
    Ok(SolveResult {
        game: g.clone(),
        normalization: NormalizationRecord::identity(g.k()),
        bounds: error_bounds(grid_n, iterations, g.beta()),
        grid,
        frontier,
        deltas,
        iterations,
        solutions: step.solutions,
        next_delta,
        converged,
    })
}

/// Normalizes a raw game and runs [`value_iteration`] on it.
pub fn solve(raw: &VectorGame, grid_n: usize, stop: Stopping) -> Result<SolveResult> {
    let (g, rec) = normalize(raw);
    let mut res = value_iteration(&g, grid_n, stop)?;
    res.normalization = rec;
    Ok(res)
}

/// Closed-form lower frontier of the two-expert regret game at `β = 1/2`:
/// `f(x) = x + 2 - 2√(2x)` on `[0, 2]`.
pub fn oracle_f(x: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&x) {
        return Err(Error::invalid(format!("oracle frontier is defined on [0, 2], got {x}")));
    }
    Ok(x + 2.0 - 2.0 * (2.0 * x).sqrt())
}

/// `sample_count` raw points of the oracle curve, denser near the ends where
/// it bends most.
pub fn oracle_frontier_k2_half(sample_count: usize) -> Result<Frontier> {
    if sample_count < 2 {
        return Err(Error::invalid("oracle needs at least two samples"));
    }
    // x = 2u² makes the curve (2u², 2(1-u)²): a parabola with even chords.
    let rows = (0..sample_count)
        .map(|i| {
            let u = i as f64 / (sample_count - 1) as f64;
            vec![2.0 * u * u, 2.0 * (1.0 - u) * (1.0 - u)]
        })
        .collect();
    Frontier::from_rows(rows)
}

/// Optimal play at the oracle point `(x, f(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMove {
    /// Probabilities of following expert 1 and expert 2.
    pub alpha: [f64; 2],
    /// Next point's first coordinate after each adversary column.
    pub next: [f64; 2],
}

/// Policy attaining the oracle curve. For `x ≤ 1/2` it follows expert 2 with
/// probability `x` and moves to `4x` or `0`; larger `x` mirrors across the
/// diagonal.
pub fn oracle_policy(x: f64) -> Result<OracleMove> {
    let y = oracle_f(x)?;
    if x <= 0.5 {
        Ok(OracleMove { alpha: [1.0 - x, x], next: [(4.0 * x).min(2.0), 0.0] })
    } else {
        let back = oracle_f((4.0 * y).min(2.0))?;
        Ok(OracleMove { alpha: [y, 1.0 - y], next: [2.0, back] })
    }
}

/// Distance between a two-expert `β = 1/2` solve and the closed-form
/// frontier, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Points sampled along the oracle curve.
    pub samples: usize,
    /// Resolution of the direction grid used for `d_sampled`.
    pub directions: usize,
    pub d_sampled: f64,
    pub d_exact: f64,
    /// A-priori bound `d_upper` of the solve.
    pub bound: f64,
    /// Allowance for sampling both the curve and the directions.
    pub slack: f64,
    pub pass: bool,
}

/// Compares `G_n` of `res` with the oracle curve, both mapped through the
/// solve's normalization.
pub fn oracle_check(res: &SolveResult, samples: usize, directions: usize) -> Result<OracleReport> {
    let beta = res.game.beta();
    if res.game.k() != 2 || (beta - 0.5).abs() > 1e-12 {
        return Err(Error::invalid("the oracle covers two experts at β = 1/2 only"));
    }
    let raw = oracle_frontier_k2_half(samples)?;
    let rows = raw
        .vertices()
        .iter()
        .map(|v| res.normalization.normalize(v, beta, None).map(Vec::from))
        .collect::<Result<Vec<_>>>()?;
    let oracle = Frontier::from_rows(rows)?;
    let d_sampled = d_distance(&res.frontier, &oracle, directions)?;
    let d_exact = d_distance_exact(&res.frontier, &oracle)?;
    let bound = res.bounds.d_upper;
    let slack = 2.0 / directions as f64;
    Ok(OracleReport {
        samples,
        directions,
        d_sampled,
        d_exact,
        bound,
        slack,
        pass: d_sampled <= bound + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{example_game, experts_game, regret_game};

    #[test]
    fn guarantee_on_example() {
        let g = example_game(0.5).unwrap();
        let q = vec![vec![0.0, 0.0]; 2];
        for (alpha, want) in [(1.0, [2.0, 2.0]), (0.5, [3.0, 1.0]), (0.0, [4.0, 2.0])] {
            let u = guarantee_vector(&g, &[alpha, 1.0 - alpha], &q).unwrap();
            assert_eq!(u.as_slice(), &want);
        }
        assert!(guarantee_vector(&g, &[1.0], &q).is_err());
    }

    #[test]
    fn bounds_examples() {
        let b = error_bounds(7, 0, 0.3);
        assert_eq!((b.e_upper, b.d_upper), (1.0, 1.0));
        let b = error_bounds(100, 30, 0.5);
        assert!((b.d_upper - 0.0200000019).abs() < 1e-9);
        let b = error_bounds(201, 66, 0.9);
        assert!((b.d_upper - 0.0507).abs() < 1e-4);
    }

    #[test]
    fn oracle_anchors() {
        assert_eq!(oracle_f(0.0).unwrap(), 2.0);
        assert!(oracle_f(2.0).unwrap().abs() < 1e-15);
        assert!((oracle_f(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(oracle_f(2.5).is_err());
        for i in 0..100 {
            let x = 0.5 * i as f64 / 99.0;
            let lhs = oracle_f(x).unwrap();
            let rhs = oracle_f(4.0 * x).unwrap() / 2.0 + 1.0 - x;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_policy_is_self_consistent() {
        // stage regret of following expert 1 / expert 2 under each column
        let g = regret_game(&experts_game(2).unwrap(), 0.5).unwrap();
        for i in 0..=40 {
            let x = 2.0 * i as f64 / 40.0;
            let here = [x, oracle_f(x).unwrap()];
            let mv = oracle_policy(x).unwrap();
            for b in 0..2 {
                let nx = mv.next[b];
                let next = [nx, oracle_f(nx).unwrap()];
                for c in 0..2 {
                    let stage = mv.alpha[0] * g.loss(0, b)[c] + mv.alpha[1] * g.loss(1, b)[c];
                    assert!(stage + 0.5 * next[c] <= here[c] + 1e-12, "x={x} b={b} c={c}");
                }
            }
        }
    }

    #[test]
    fn refuses_raw_games() {
        let g = example_game(0.5).unwrap();
        assert!(matches!(value_iteration(&g, 4, Stopping::Iterations(1)), Err(Error::NotNormalized(_))));
    }
}

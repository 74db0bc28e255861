//! Linear programs in general form and a revised primal simplex solver.
//!
//! Programs are stated as `minimize c·x` subject to sparse rows with
//! `≤`, `=` or `≥` relations and per-variable bounds (lower defaults to 0,
//! either side may be infinite). The solver converts to standard form,
//! runs a two-phase revised simplex with an explicit dense basis inverse
//! and always returns a *basic* optimal solution: the number of nonzero
//! structural variables never exceeds the number of rows.
//!
//! Pricing is Dantzig's rule with a Harris two-pass ratio test. After a run
//! of degenerate pivots the solver switches to Bland's rule until progress
//! resumes, which rules out cycling. Pivoting is fully deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Primal feasibility tolerance for reported solutions.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
pub const OPT_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-11;
const DRIVE_OUT_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 50;
const BLAND_AFTER: usize = 30;
const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One row `Σ coeffs · x (relation) rhs`. Repeated indices are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} references variable {var}, but the program has {num_vars} variables")]
    BadIndex { row: usize, var: usize, num_vars: usize },
    #[error("constraint row has length {len}, expected {num_vars}")]
    RowLength { len: usize, num_vars: usize },
    #[error("objective has length {len}, expected {num_vars}")]
    ObjectiveLength { len: usize, num_vars: usize },
    #[error("variable {var} has inconsistent bounds [{lower}, {upper}]")]
    Bounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// A program over `num_vars` nonnegative variables with zero objective.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_objective(&mut self, coeffs: Vec<f64>) -> Result<(), LpError> {
        if coeffs.len() != self.num_vars {
            return Err(LpError::ObjectiveLength { len: coeffs.len(), num_vars: self.num_vars });
        }
        self.objective = coeffs;
        Ok(())
    }

    pub fn set_objective_coeff(&mut self, var: usize, c: f64) {
        self.objective[var] = c;
    }

    /// Sets bounds for `var`; use `f64::NEG_INFINITY` / `f64::INFINITY` for
    /// missing sides.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY);
    }

    /// Adds a dense row.
    pub fn add_constraint(&mut self, row: &[f64], relation: Relation, rhs: f64) -> Result<(), LpError> {
        if row.len() != self.num_vars {
            return Err(LpError::RowLength { len: row.len(), num_vars: self.num_vars });
        }
        let coeffs = row
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(j, &a)| (j, a))
            .collect();
        self.constraints.push(Constraint { coeffs, relation, rhs });
        Ok(())
    }

    /// Adds a sparse row; indices are checked by [`LinearProgram::validate`].
    pub fn add_sparse_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::ObjectiveLength { len: self.objective.len(), num_vars: self.num_vars });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (var, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::Bounds { var, lower: lo, upper: hi });
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite("right-hand side"));
            }
            for &(var, a) in &c.coeffs {
                if var >= self.num_vars {
                    return Err(LpError::BadIndex { row, var, num_vars: self.num_vars });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite("constraint coefficient"));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective at `primal`; meaningful only when optimal.
    pub objective: f64,
    /// Structural variable values; meaningful only when optimal.
    pub primal: Vec<f64>,
    /// Structural variables with a standard-form column in the final basis.
    pub basic_vars: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Indices of structural variables with value above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        self.primal
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tol)
            .map(|(j, _)| j)
            .collect()
    }
}

/// How a structural variable is expressed through standard-form columns.
#[derive(Debug, Clone, Copy)]
enum ColMap {
    /// `x = lower + s`
    Shift { col: usize, lower: f64 },
    /// `x = upper - s`
    Negate { col: usize, upper: f64 },
    /// `x = s⁺ - s⁻`
    Split { pos: usize, neg: usize },
}

/// Standard form `min c·s, A s = b, s ≥ 0, b ≥ 0` with an initial basis.
struct StandardForm {
    m: usize,
    n_real: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    initial_basis: Vec<usize>,
    maps: Vec<ColMap>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let mut maps = Vec::with_capacity(lp.num_vars);
        let mut cost = Vec::new();
        // (row, value) entries per standard column
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..lp.num_vars {
            let (lo, hi, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
            let next = cost.len();
            if lo.is_finite() {
                maps.push(ColMap::Shift { col: next, lower: lo });
                cost.push(c);
                if hi.is_finite() {
                    bound_rows.push((next, hi - lo));
                }
            } else if hi.is_finite() {
                maps.push(ColMap::Negate { col: next, upper: hi });
                cost.push(-c);
            } else {
                maps.push(ColMap::Split { pos: next, neg: next + 1 });
                cost.push(c);
                cost.push(-c);
            }
        }
        let n_struct = cost.len();

        struct Row {
            entries: Vec<(usize, f64)>,
            slack: f64,
            rhs: f64,
        }
        let mut rows: Vec<Row> = Vec::with_capacity(lp.constraints.len() + bound_rows.len());
        for c in &lp.constraints {
            let mut entries = Vec::with_capacity(c.coeffs.len());
            let mut rhs = c.rhs;
            for &(j, a) in &c.coeffs {
                match maps[j] {
                    ColMap::Shift { col, lower } => {
                        entries.push((col, a));
                        rhs -= a * lower;
                    }
                    ColMap::Negate { col, upper } => {
                        entries.push((col, -a));
                        rhs -= a * upper;
                    }
                    ColMap::Split { pos, neg } => {
                        entries.push((pos, a));
                        entries.push((neg, -a));
                    }
                }
            }
            let slack = match c.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => 0.0,
            };
            rows.push(Row { entries, slack, rhs });
        }
        for (col, width) in bound_rows {
            rows.push(Row { entries: vec![(col, 1.0)], slack: 1.0, rhs: width });
        }

        let m = rows.len();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b = Vec::with_capacity(m);
        let mut initial_basis = vec![NONBASIC; m];
        let mut next_col = n_struct;
        let mut slack_cols = Vec::new();
        for (i, row) in rows.iter_mut().enumerate() {
            if row.rhs < 0.0 {
                row.rhs = -row.rhs;
                row.slack = -row.slack;
                for e in row.entries.iter_mut() {
                    e.1 = -e.1;
                }
            }
            for &(col, a) in &row.entries {
                if a != 0.0 {
                    triplets.push((i, col, a));
                }
            }
            if row.slack != 0.0 {
                triplets.push((i, next_col, row.slack));
                if row.slack > 0.0 {
                    initial_basis[i] = next_col;
                }
                slack_cols.push(next_col);
                next_col += 1;
            }
            b.push(row.rhs);
        }
        cost.resize(next_col, 0.0);
        let n_real = next_col;
        for (i, slot) in initial_basis.iter_mut().enumerate() {
            if *slot == NONBASIC {
                triplets.push((i, next_col, 1.0));
                *slot = next_col;
                next_col += 1;
            }
        }
        cost.resize(next_col, 0.0);

        let ncols = next_col;
        let mut counts = vec![0usize; ncols + 1];
        for &(_, col, _) in &triplets {
            counts[col + 1] += 1;
        }
        for k in 0..ncols {
            counts[k + 1] += counts[k];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let mut row_idx = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(row, col, v) in &triplets {
            let at = fill[col];
            row_idx[at] = row;
            vals[at] = v;
            fill[col] += 1;
        }

        StandardForm { m, n_real, col_start, row_idx, vals, cost, b, initial_basis, maps }
    }

    fn ncols(&self) -> usize {
        self.col_start.len() - 1
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        self.row_idx[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    m: usize,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    limit: usize,
    bland_only: bool,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm) -> Self {
        let m = sf.m;
        let mut pos = vec![NONBASIC; sf.ncols()];
        for (r, &c) in sf.initial_basis.iter().enumerate() {
            pos[c] = r;
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        Simplex {
            sf,
            m,
            basis: sf.initial_basis.clone(),
            pos,
            binv,
            xb: sf.b.clone(),
            iterations: 0,
            since_refactor: 0,
            limit: 50 * (m + sf.ncols()) + 1000,
            bland_only: false,
        }
    }

    fn ftran(&self, col: usize, out: &mut [f64]) {
        let m = self.m;
        out.fill(0.0);
        for (i, a) in self.sf.column(col) {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.binv[r * m + i] * a;
            }
        }
    }

    fn pivot(&mut self, enter: usize, leave_row: usize, u: &[f64], theta: f64) -> Result<(), LpError> {
        let m = self.m;
        for (x, &ui) in self.xb.iter_mut().zip(u) {
            *x -= theta * ui;
        }
        self.xb[leave_row] = theta;
        let piv = u[leave_row];
        let (before, rest) = self.binv.split_at_mut(leave_row * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (r, row) in before.chunks_exact_mut(m).enumerate() {
            let f = u[r];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let f = u[leave_row + 1 + k];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        let old = self.basis[leave_row];
        self.pos[old] = NONBASIC;
        self.basis[leave_row] = enter;
        self.pos[enter] = leave_row;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes the basis inverse from scratch (Gauss-Jordan, partial pivoting).
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (r, &c) in self.basis.iter().enumerate() {
            for (i, v) in self.sf.column(c) {
                a[i * m + r] += v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for col in 0..m {
            let (mut best, mut best_abs) = (col, a[col * m + col].abs());
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs < 1e-13 {
                return Err(LpError::Singular);
            }
            if best != col {
                for k in 0..m {
                    a.swap(col * m + k, best * m + k);
                    inv.swap(col * m + k, best * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for r in 0..m {
            self.xb[r] = (0..m).map(|i| self.binv[r * m + i] * self.sf.b[i]).sum();
        }
        Ok(())
    }

    fn run(&mut self, cost: &[f64], allow_artificial: bool) -> Result<PhaseOutcome, LpError> {
        let m = self.m;
        let ncols = if allow_artificial { self.sf.ncols() } else { self.sf.n_real };
        let mut y = vec![0.0; m];
        let mut u = vec![0.0; m];
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..m).map(|r| cost[self.basis[r]] * self.binv[r * m + i]).sum();
            }
            let bland = self.bland_only || degenerate > BLAND_AFTER;
            let mut enter = None;
            let mut best = -OPT_TOL;
            for j in 0..ncols {
                if self.pos[j] != NONBASIC {
                    continue;
                }
                let d = cost[j] - self.sf.column(j).map(|(i, a)| y[i] * a).sum::<f64>();
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return Ok(PhaseOutcome::Optimal);
            };
            self.ftran(q, &mut u);

            let leave = if bland { self.ratio_bland(&u) } else { self.ratio_harris(&u) };
            let Some(r) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };
            let theta = (self.xb[r].max(0.0)) / u[r];
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(q, r, &u, theta)?;
        }
    }

    fn ratio_harris(&self, u: &[f64]) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for (x, &ui) in self.xb.iter().zip(u) {
            if ui > PIVOT_TOL {
                bound = bound.min((x.max(0.0) + HARRIS_TOL) / ui);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best = None;
        let mut best_u = 0.0;
        for (r, (x, &ui)) in self.xb.iter().zip(u).enumerate() {
            if ui > PIVOT_TOL && x.max(0.0) / ui <= bound && ui > best_u {
                best = Some(r);
                best_u = ui;
            }
        }
        best
    }

    fn ratio_bland(&self, u: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (r, (x, &ui)) in self.xb.iter().zip(u).enumerate() {
            if ui <= PIVOT_TOL {
                continue;
            }
            let ratio = x.max(0.0) / ui;
            best = match best {
                None => Some((r, ratio)),
                Some((br, bratio)) => {
                    if ratio < bratio - 1e-12
                        || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                    {
                        Some((r, ratio))
                    } else {
                        Some((br, bratio))
                    }
                }
            };
        }
        best.map(|(r, _)| r)
    }

    /// Pivots zero-level artificials out of the basis where possible. Rows
    /// where no real column has a usable entry are redundant; their
    /// artificial stays basic at zero.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut u = vec![0.0; m];
        for r in 0..m {
            if self.basis[r] < self.sf.n_real {
                continue;
            }
            let mut best = None;
            let mut best_abs = DRIVE_OUT_TOL;
            for j in 0..self.sf.n_real {
                if self.pos[j] != NONBASIC {
                    continue;
                }
                let alpha: f64 = self.sf.column(j).map(|(i, a)| self.binv[r * m + i] * a).sum();
                if alpha.abs() > best_abs {
                    best_abs = alpha.abs();
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                self.ftran(j, &mut u);
                let theta = self.xb[r] / u[r];
                self.pivot(j, r, &u, theta)?;
            }
        }
        Ok(())
    }
}

/// Minimizes `lp`. Infeasibility and unboundedness are reported through
/// [`LpSolution::status`]; `Err` is reserved for malformed programs and
/// numerical breakdown.
pub fn solve_min(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let sf = StandardForm::build(lp);
    match solve_standard(lp, &sf, false) {
        // Bland's rule walks a different, usually shorter-stepped path.
        Err(LpError::Singular) => solve_standard(lp, &sf, true),
        other => other,
    }
}

fn solve_standard(lp: &LinearProgram, sf: &StandardForm, bland_only: bool) -> Result<LpSolution, LpError> {
    let mut sx = Simplex::new(sf);
    sx.bland_only = bland_only;

    let has_artificial = sf.ncols() > sf.n_real;
    if has_artificial {
        let phase_one: Vec<f64> = (0..sf.ncols()).map(|j| if j >= sf.n_real { 1.0 } else { 0.0 }).collect();
        sx.run(&phase_one, true)?;
        sx.refactor()?;
        let infeas: f64 = sx
            .basis
            .iter()
            .zip(&sx.xb)
            .filter(|(&c, _)| c >= sf.n_real)
            .map(|(_, x)| x.max(0.0))
            .sum();
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if infeas > FEAS_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                primal: Vec::new(),
                basic_vars: Vec::new(),
                iterations: sx.iterations,
            });
        }
        sx.drive_out_artificials()?;
    }

    let mut phase_two = sf.cost.clone();
    for c in phase_two.iter_mut().skip(sf.n_real) {
        *c = 0.0;
    }
    let outcome = sx.run(&phase_two, false)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            primal: Vec::new(),
            basic_vars: Vec::new(),
            iterations: sx.iterations,
        });
    }
    sx.refactor()?;

    let mut s = vec![0.0; sf.ncols()];
    for (r, &c) in sx.basis.iter().enumerate() {
        s[c] = sx.xb[r].max(0.0);
    }
    let mut primal = Vec::with_capacity(lp.num_vars);
    let mut basic_vars = Vec::new();
    for (j, map) in sf.maps.iter().enumerate() {
        let (value, basic) = match *map {
            ColMap::Shift { col, lower } => (lower + s[col], sx.pos[col] != NONBASIC),
            ColMap::Negate { col, upper } => (upper - s[col], sx.pos[col] != NONBASIC),
            ColMap::Split { pos, neg } => {
                (s[pos] - s[neg], sx.pos[pos] != NONBASIC || sx.pos[neg] != NONBASIC)
            }
        };
        primal.push(value);
        if basic {
            basic_vars.push(j);
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.evaluate(&primal),
        primal,
        basic_vars,
        iterations: sx.iterations,
    })
}

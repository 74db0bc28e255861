//! Loss vectors, Pareto dominance, the direction grid and polytope frontiers.
//!
//! A frontier is stored as the vertex list of a convex polytope; the set it
//! represents is the lower Pareto frontier of the hull of those vertices.
//! Every question about a frontier is answered through the line
//! `x = t·1 + p`: the smallest `t` for which the line enters the upset of
//! the hull is one small linear program, and both the grid approximation
//! and the `e`/`d` metrics are built from it.

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_min, LinearProgram, Relation};

/// Absolute tolerance for geometric comparisons.
pub const GEOM_TOL: f64 = 1e-7;

/// Upper edge of the box frontiers live in.
pub const BOX_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("loss vector"));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("loss vector has a non-finite component"));
        }
        Ok(LossVector(components))
    }

    pub fn zeros(k: usize) -> Self {
        LossVector(vec![0.0; k])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self + c·1`
    pub fn shifted(&self, c: f64) -> LossVector {
        LossVector(self.0.iter().map(|x| x + c).collect())
    }

    pub fn max_abs_diff(&self, other: &LossVector) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }
}

impl Deref for LossVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<LossVector> for Vec<f64> {
    fn from(v: LossVector) -> Self {
        v.0
    }
}

impl fmt::Display for LossVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `u ⪯ v`: every component of `u` is at most the matching one of `v`.
pub fn dominates(u: &[f64], v: &[f64]) -> Result<bool> {
    check_dims(u.len(), v.len())?;
    Ok(weakly_below(u, v))
}

fn weakly_below(u: &[f64], v: &[f64]) -> bool {
    u.iter().zip(v).all(|(a, b)| a <= b)
}

/// Keeps the points not dominated by another listed point. Exact duplicates
/// collapse onto their first occurrence; output keeps input order.
pub fn pareto_prune(points: &[LossVector]) -> Result<Vec<LossVector>> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    for p in points {
        check_dims(points[0].dim(), p.dim())?;
    }
    Ok(nondominated_indices(points).into_iter().map(|i| points[i].clone()).collect())
}

/// Indices, ascending, of the points kept by [`pareto_prune`].
pub fn nondominated_indices(points: &[LossVector]) -> Vec<usize> {
    // A dominator is lexicographically no larger than what it dominates, so a
    // sweep in lexicographic order only has to test against kept points.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(points[b].iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        if !kept.iter().any(|&j| weakly_below(&points[j], &points[i])) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Indices, ascending, of a subset of `frontier`'s vertices with the same
/// upset hull up to `tol`: a vertex is dropped when it lies within `tol` of
/// the upset of the hull of the vertices still kept.
pub fn essential_vertices(frontier: &Frontier, tol: f64) -> Result<Vec<usize>> {
    let mut kept = nondominated_indices(frontier.vertices());
    let mut i = 0;
    while i < kept.len() && kept.len() > 1 {
        let j = kept[i];
        let others: Vec<usize> = kept.iter().copied().filter(|&x| x != j).collect();
        if intersect_subset(&frontier.vertices[j], &frontier.vertices, &others)?.t <= tol {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(kept)
}

/// A direction `p ∈ [0,1]^K` with at least one zero coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("direction"));
        }
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::invalid(format!("direction {coords:?} leaves [0,1]")));
        }
        if !coords.contains(&0.0) {
            return Err(Error::invalid(format!("direction {coords:?} has no zero coordinate")));
        }
        Ok(ParamPoint(coords))
    }

    pub fn origin(k: usize) -> Self {
        ParamPoint(vec![0.0; k])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ParamPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Quantized union of the `K` faces `{p : p_k = 0}` of the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub k: usize,
    pub n: usize,
    pub points: Vec<ParamPoint>,
    /// `K(N+1)^(K-1) - (K-1)`, which counts shared face boundaries more than
    /// once when `K ≥ 3`.
    pub nominal_size: usize,
}

impl ParamGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point equal to `p`, if any.
    pub fn index_of(&self, p: &[f64]) -> Option<usize> {
        self.points.iter().position(|q| q.as_slice() == p)
    }
}

/// Nominal grid size `K(N+1)^(K-1) - (K-1)`.
pub fn nominal_grid_size(k: usize, n: usize) -> usize {
    k * (n + 1).pow((k - 1) as u32) - (k - 1)
}

/// Builds the direction grid with spacing `1/N`, face by face, dropping
/// points already produced by an earlier face.
pub fn param_grid(k: usize, n: usize) -> Result<ParamGrid> {
    if k < 2 {
        return Err(Error::invalid(format!("grid dimension must be at least 2, got {k}")));
    }
    if n < 1 {
        return Err(Error::invalid("grid resolution must be at least 1"));
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut points = Vec::new();
    let per_face = (n + 1).pow((k - 1) as u32);
    for face in 0..k {
        for code in 0..per_face {
            // base-(N+1) digits, last coordinate fastest
            let mut rest = code;
            let mut idx = vec![0usize; k - 1];
            for d in idx.iter_mut().rev() {
                *d = rest % (n + 1);
                rest /= n + 1;
            }
            idx.insert(face, 0);
            if seen.insert(idx.clone()) {
                points.push(ParamPoint(idx.iter().map(|&i| i as f64 / n as f64).collect()));
            }
        }
    }
    Ok(ParamGrid { k, n, points, nominal_size: nominal_grid_size(k, n) })
}

/// Vertex list of a convex polytope in `[0,2]^K`, optionally tagged with the
/// grid direction that produced each vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FrontierFile", try_from = "FrontierFile")]
pub struct Frontier {
    vertices: Vec<LossVector>,
    params: Option<Vec<ParamPoint>>,
}

impl Frontier {
    pub fn new(vertices: Vec<LossVector>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::Empty("frontier vertices"))?;
        let k = first.dim();
        for v in &vertices {
            check_dims(k, v.dim())?;
            if v.iter().any(|&x| x < -GEOM_TOL || x > BOX_MAX + GEOM_TOL) {
                return Err(Error::invalid(format!("frontier vertex {v} leaves [0, {BOX_MAX}]^{k}")));
            }
        }
        Ok(Frontier { vertices, params: None })
    }

    pub fn with_params(vertices: Vec<LossVector>, params: Vec<ParamPoint>) -> Result<Self> {
        let mut f = Frontier::new(vertices)?;
        if params.len() != f.vertices.len() {
            return Err(Error::DimensionMismatch { expected: f.vertices.len(), found: params.len() });
        }
        for p in &params {
            check_dims(f.dim(), p.dim())?;
        }
        f.params = Some(params);
        Ok(f)
    }

    /// The frontier `{0}`.
    pub fn origin(k: usize) -> Self {
        Frontier { vertices: vec![LossVector::zeros(k)], params: None }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Frontier::new(rows.into_iter().map(LossVector::new).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[LossVector] {
        &self.vertices
    }

    pub fn params(&self) -> Option<&[ParamPoint]> {
        self.params.as_deref()
    }

    /// Vertices shifted by `c·1`, clipped into the box.
    pub fn shifted(&self, c: f64) -> Result<Frontier> {
        let vertices = self
            .vertices
            .iter()
            .map(|v| LossVector(v.iter().map(|x| (x + c).clamp(0.0, BOX_MAX)).collect()))
            .collect();
        Ok(Frontier { vertices, params: self.params.clone() })
    }

    pub fn to_file(&self, beta: Option<f64>) -> FrontierFile {
        FrontierFile {
            k: self.dim(),
            beta,
            vertices: self.vertices.iter().map(|v| v.0.clone()).collect(),
            params: self.params.as_ref().map(|ps| ps.iter().map(|p| p.0.clone()).collect()),
        }
    }

    pub fn from_file(file: &FrontierFile) -> Result<Frontier> {
        let vertices: Vec<LossVector> =
            file.vertices.iter().cloned().map(LossVector::new).collect::<Result<_>>()?;
        let f = match &file.params {
            Some(ps) => {
                let params = ps.iter().cloned().map(ParamPoint::new).collect::<Result<_>>()?;
                Frontier::with_params(vertices, params)?
            }
            None => Frontier::new(vertices)?,
        };
        check_dims(file.k, f.dim())?;
        Ok(f)
    }

    /// One vertex per row; direction columns follow when tagged.
    pub fn to_csv(&self) -> String {
        vertices_csv(&self.vertices.iter().map(|v| v.0.clone()).collect::<Vec<_>>(), self.params())
    }
}

/// CSV text for a vertex list, with optional direction columns.
pub fn vertices_csv(rows: &[Vec<f64>], params: Option<&[ParamPoint]>) -> String {
    let k = rows.first().map_or(0, |r| r.len());
    let mut header: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    if params.is_some() {
        header.extend((1..=k).map(|i| format!("p{i}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        if let Some(ps) = params {
            cells.extend(ps[i].iter().map(|x| x.to_string()));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

impl From<Frontier> for FrontierFile {
    fn from(f: Frontier) -> Self {
        f.to_file(None)
    }
}

impl TryFrom<FrontierFile> for Frontier {
    type Error = Error;
    fn try_from(file: FrontierFile) -> Result<Self> {
        Frontier::from_file(&file)
    }
}

/// JSON form of a frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierFile {
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    pub vertices: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<Vec<Vec<f64>>>,
}

/// Smallest point of the line `t·1 + offset` inside the upset of the hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub t: f64,
    pub point: LossVector,
    /// Convex weights `(vertex index, weight)` of a hull point dominated by
    /// `point`, from a basic solution (at most `K+1` entries).
    pub weights: Vec<(usize, f64)>,
}

impl Intersection {
    /// The hull point `Σ w_j v_j` certifying the intersection.
    pub fn hull_point(&self, frontier: &Frontier) -> LossVector {
        let mut acc = vec![0.0; frontier.dim()];
        for &(j, w) in &self.weights {
            for (a, x) in acc.iter_mut().zip(frontier.vertices[j].iter()) {
                *a += w * x;
            }
        }
        LossVector(acc)
    }
}

/// Minimizes `t` subject to `t·1 + offset ⪰ Σ_j w_j v_j`, `w ∈ Δ`.
///
/// `offset` need not be a grid direction; with `offset = u` the optimal `t`
/// is the signed `L∞` gap from `u` to the upset of the hull.
pub fn line_intersect(offset: &[f64], frontier: &Frontier) -> Result<Intersection> {
    check_dims(frontier.dim(), offset.len())?;
    let all: Vec<usize> = (0..frontier.len()).collect();
    intersect_subset(offset, &frontier.vertices, &all)
}

/// [`line_intersect`] against the hull of `vertices[subset]`; weights refer
/// to indices of `vertices`.
fn intersect_subset(offset: &[f64], vertices: &[LossVector], subset: &[usize]) -> Result<Intersection> {
    let k = offset.len();
    let nv = subset.len();
    let mut lp = LinearProgram::new(nv + 1);
    lp.set_free(0);
    lp.set_objective_coeff(0, 1.0);
    for c in 0..k {
        let mut row = Vec::with_capacity(nv + 1);
        row.push((0, 1.0));
        for (jj, &j) in subset.iter().enumerate() {
            let x = vertices[j][c];
            if x != 0.0 {
                row.push((jj + 1, -x));
            }
        }
        lp.add_sparse_constraint(row, Relation::Ge, -offset[c]);
    }
    lp.add_sparse_constraint((1..=nv).map(|j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    let sol = solve_min(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Numeric {
            direction: offset.to_vec(),
            reason: format!("intersection program ended {:?}", sol.status),
        });
    }
    let t = sol.primal[0];
    let weights = sol.primal[1..]
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(jj, &w)| (subset[jj], w))
        .collect();
    Ok(Intersection {
        t,
        point: LossVector(offset.iter().map(|p| t + p).collect()),
        weights,
    })
}

/// Componentwise smallest point of the line `x = t·1 + p` in the upset of
/// `frontier`.
pub fn frontier_intersect(p: &ParamPoint, frontier: &Frontier) -> Result<Intersection> {
    line_intersect(p, frontier)
}

/// Signed gap `min {ε : u + ε·1 dominates a hull point}`.
pub fn upset_gap(u: &[f64], frontier: &Frontier) -> Result<f64> {
    Ok(line_intersect(u, frontier)?.t)
}

/// `t`-values of `frontier` along every direction of `grid`.
pub fn directional_values(frontier: &Frontier, directions: &[ParamPoint]) -> Result<Vec<f64>> {
    directions
        .par_iter()
        .map(|p| frontier_intersect(p, frontier).map(|i| i.t))
        .collect()
}

/// Directed distance `e(U, V)`, the least `ε` such that every point of `U`
/// ε-dominates a point of `V`, sampled on the directions of `param_grid(K, M)`.
///
/// Sampling can only underestimate; the error is at most `2/M`.
pub fn e_distance(u: &Frontier, v: &Frontier, m: usize) -> Result<f64> {
    check_dims(u.dim(), v.dim())?;
    let grid = param_grid(u.dim(), m)?;
    let tu = directional_values(u, &grid.points)?;
    let tv = directional_values(v, &grid.points)?;
    Ok(directed_gap(&tu, &tv))
}

fn directed_gap(tu: &[f64], tv: &[f64]) -> f64 {
    tu.iter().zip(tv).fold(0.0f64, |acc, (a, b)| acc.max(b - a))
}

/// Symmetric distance `d(U, V) = max(e(U, V), e(V, U))` on the same grid.
pub fn d_distance(u: &Frontier, v: &Frontier, m: usize) -> Result<f64> {
    check_dims(u.dim(), v.dim())?;
    let grid = param_grid(u.dim(), m)?;
    let tu = directional_values(u, &grid.points)?;
    let tv = directional_values(v, &grid.points)?;
    Ok(directed_gap(&tu, &tv).max(directed_gap(&tv, &tu)))
}

/// Exact `e(U, V)`: the gap to the upset of `V` is convex along `U`'s hull,
/// so its maximum sits at a vertex of `U`.
pub fn e_distance_exact(u: &Frontier, v: &Frontier) -> Result<f64> {
    check_dims(u.dim(), v.dim())?;
    let gaps: Vec<f64> = u
        .vertices
        .par_iter()
        .map(|x| upset_gap(x, v))
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Exact symmetric distance from [`e_distance_exact`].
pub fn d_distance_exact(u: &Frontier, v: &Frontier) -> Result<f64> {
    Ok(e_distance_exact(u, v)?.max(e_distance_exact(v, u)?))
}

/// Replaces `frontier` by the hull of its intersections with every grid
/// line. Vertices are tagged with their direction and kept even when
/// dominated, so vertex `i` always belongs to grid point `i`.
pub fn gamma_approx(frontier: &Frontier, grid: &ParamGrid) -> Result<Frontier> {
    check_dims(grid.k, frontier.dim())?;
    let vertices: Vec<LossVector> = grid
        .points
        .par_iter()
        .map(|p| frontier_intersect(p, frontier).map(|i| i.point))
        .collect::<Result<_>>()?;
    Frontier::with_params(vertices, grid.points.clone())
}

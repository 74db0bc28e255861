//! Vector-loss games, normalization into `[0, 1-β]`, the regret transform,
//! the experts games and frontier readouts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{frontier_intersect, line_intersect, Frontier, LossVector, ParamPoint};

/// Repeated game with `m` actions for the player, `n` for the adversary and
/// `K`-dimensional losses `r(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GameFile", try_from = "GameFile")]
pub struct VectorGame {
    m: usize,
    n: usize,
    k: usize,
    beta: f64,
    /// `r[a][b][k]`, flattened row-major.
    losses: Vec<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("discount factor must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

impl VectorGame {
    pub fn new(losses: Vec<Vec<Vec<f64>>>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let m = losses.len();
        if m == 0 {
            return Err(Error::Empty("player actions"));
        }
        let n = losses[0].len();
        if n == 0 {
            return Err(Error::Empty("adversary actions"));
        }
        let k = losses[0][0].len();
        if k == 0 {
            return Err(Error::Empty("loss components"));
        }
        let mut flat = Vec::with_capacity(m * n * k);
        for row in &losses {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            for r in row {
                if r.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, found: r.len() });
                }
                if r.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("game losses must be finite"));
                }
                flat.extend_from_slice(r);
            }
        }
        Ok(VectorGame { m, n, k, beta, losses: flat })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `r(a, b)`
    pub fn loss(&self, a: usize, b: usize) -> &[f64] {
        let start = (a * self.n + b) * self.k;
        &self.losses[start..start + self.k]
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(VectorGame { beta, ..self.clone() })
    }

    /// All entries lie in `[0, 1-β]` up to `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        let hi = 1.0 - self.beta;
        self.losses.iter().all(|&x| x >= -tol && x <= hi + tol)
    }

    pub fn losses_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.m)
            .map(|a| (0..self.n).map(|b| self.loss(a, b).to_vec()).collect())
            .collect()
    }

    pub fn to_file(&self) -> GameFile {
        GameFile { m: self.m, n: self.n, k: self.k, beta: self.beta, losses: self.losses_nested() }
    }

    pub fn from_file(file: &GameFile) -> Result<Self> {
        let g = VectorGame::new(file.losses.clone(), file.beta)?;
        if (g.m, g.n, g.k) != (file.m, file.n, file.k) {
            return Err(Error::invalid(format!(
                "game header says {}x{}x{} but losses are {}x{}x{}",
                file.m, file.n, file.k, g.m, g.n, g.k
            )));
        }
        Ok(g)
    }
}

impl From<VectorGame> for GameFile {
    fn from(g: VectorGame) -> Self {
        g.to_file()
    }
}

impl TryFrom<GameFile> for VectorGame {
    type Error = Error;
    fn try_from(file: GameFile) -> Result<Self> {
        VectorGame::from_file(&file)
    }
}

/// JSON form of a vector game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub losses: Vec<Vec<Vec<f64>>>,
}

/// Scalar losses `l(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGame {
    losses: Vec<Vec<f64>>,
}

impl ScalarGame {
    pub fn new(losses: Vec<Vec<f64>>) -> Result<Self> {
        let n = losses.first().ok_or(Error::Empty("player actions"))?.len();
        if n == 0 {
            return Err(Error::Empty("adversary actions"));
        }
        for row in &losses {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("game losses must be finite"));
            }
        }
        Ok(ScalarGame { losses })
    }

    pub fn m(&self) -> usize {
        self.losses.len()
    }

    pub fn n(&self) -> usize {
        self.losses[0].len()
    }

    pub fn loss(&self, a: usize, b: usize) -> f64 {
        self.losses[a][b]
    }

    pub fn losses(&self) -> &[Vec<f64>] {
        &self.losses
    }

    /// Loss column `(l(a, b))_a`.
    pub fn column(&self, b: usize) -> Vec<f64> {
        self.losses.iter().map(|row| row[b]).collect()
    }

    /// Adversary action whose loss column equals `outcome` exactly.
    pub fn column_of(&self, outcome: &[f64]) -> Option<usize> {
        if outcome.len() != self.m() {
            return None;
        }
        (0..self.n()).find(|&b| self.losses.iter().zip(outcome).all(|(row, &x)| row[b] == x))
    }
}

/// JSON form of a scalar game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGameFile {
    pub losses: Vec<Vec<f64>>,
    pub beta: f64,
}

/// Affine map `x ↦ s·x + c` taking raw stage losses into `[0, 1-β]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub scale: f64,
    pub shifts: Vec<f64>,
}

/// `Σ_{t<n} β^t`, or `1/(1-β)` for the infinite horizon.
pub fn horizon_weight(beta: f64, horizon: Option<usize>) -> f64 {
    match horizon {
        Some(n) => (1.0 - beta.powi(n as i32)) / (1.0 - beta),
        None => 1.0 / (1.0 - beta),
    }
}

impl NormalizationRecord {
    pub fn identity(k: usize) -> Self {
        NormalizationRecord { scale: 1.0, shifts: vec![0.0; k] }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::invalid(format!("normalization scale must be positive, got {}", self.scale)));
        }
        if self.shifts.len() != dim {
            return Err(Error::DimensionMismatch { expected: self.shifts.len(), found: dim });
        }
        Ok(())
    }

    /// Raw discounted sum of a normalized one accumulated over `horizon`
    /// stages (`None` for the infinite horizon).
    pub fn denormalize(&self, v: &[f64], beta: f64, horizon: Option<usize>) -> Result<LossVector> {
        self.check(v.len())?;
        let h = horizon_weight(beta, horizon);
        LossVector::new(v.iter().zip(&self.shifts).map(|(x, c)| (x - c * h) / self.scale).collect())
    }

    /// Inverse of [`NormalizationRecord::denormalize`].
    pub fn normalize(&self, raw: &[f64], beta: f64, horizon: Option<usize>) -> Result<LossVector> {
        self.check(raw.len())?;
        let h = horizon_weight(beta, horizon);
        LossVector::new(raw.iter().zip(&self.shifts).map(|(x, c)| self.scale * x + c * h).collect())
    }

    /// Raw stage-loss scale: `raw = normalized / scale` for differences.
    pub fn raw_length(&self, normalized: f64) -> f64 {
        normalized / self.scale
    }

    /// Record of applying `self` after `inner`.
    pub fn compose(&self, inner: &NormalizationRecord) -> NormalizationRecord {
        NormalizationRecord {
            scale: self.scale * inner.scale,
            shifts: inner.shifts.iter().zip(&self.shifts).map(|(ci, co)| self.scale * ci + co).collect(),
        }
    }
}

/// Infinite-horizon raw value of a normalized discounted sum.
pub fn denormalize_vector(v: &[f64], rec: &NormalizationRecord, beta: f64) -> Result<LossVector> {
    rec.denormalize(v, beta, None)
}

/// Inverse of [`denormalize_vector`].
pub fn normalize_vector(raw: &[f64], rec: &NormalizationRecord, beta: f64) -> Result<LossVector> {
    rec.normalize(raw, beta, None)
}

/// Rescales `g` uniformly and shifts each component so every stage loss lies
/// in `[0, 1-β]`.
pub fn normalize(g: &VectorGame) -> (VectorGame, NormalizationRecord) {
    let k = g.k;
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for chunk in g.losses.chunks(k) {
        for (c, &x) in chunk.iter().enumerate() {
            lo[c] = lo[c].min(x);
            hi[c] = hi[c].max(x);
        }
    }
    let range = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
    let scale = if range > 0.0 { (1.0 - g.beta) / range } else { 1.0 - g.beta };
    let shifts: Vec<f64> = lo.iter().map(|l| -scale * l).collect();
    let top = 1.0 - g.beta;
    let losses = g
        .losses
        .chunks(k)
        .flat_map(|chunk| {
            chunk
                .iter()
                .zip(&shifts)
                .map(|(x, c)| (scale * x + c).clamp(0.0, top))
                .collect::<Vec<_>>()
        })
        .collect();
    (VectorGame { losses, ..g.clone() }, NormalizationRecord { scale, shifts })
}

/// `r_k(a, b) = l(a, b) - l(k, b)`: stage regret against each fixed action.
pub fn regret_game(g: &ScalarGame, beta: f64) -> Result<VectorGame> {
    let m = g.m();
    let losses = (0..m)
        .map(|a| {
            (0..g.n())
                .map(|b| (0..m).map(|k| g.loss(a, b) - g.loss(k, b)).collect())
                .collect()
        })
        .collect();
    VectorGame::new(losses, beta)
}

/// Nonconstant outcomes of the experts problem with `K` experts, one column
/// per set of erring experts: `{1}, {2}` for two experts and
/// `{1}, {2}, {3}, {1,2}, {1,3}, {2,3}` for three.
pub fn experts_game(k: usize) -> Result<ScalarGame> {
    let subsets: Vec<Vec<usize>> = match k {
        2 => vec![vec![0], vec![1]],
        3 => vec![vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]],
        _ => return Err(Error::invalid(format!("experts games exist for K = 2 or 3, got {k}"))),
    };
    let losses = (0..k)
        .map(|a| subsets.iter().map(|s| if s.contains(&a) { 1.0 } else { 0.0 }).collect())
        .collect();
    ScalarGame::new(losses)
}

/// Two-action game whose one-stage frontier from `{0}` is the segment from
/// `(2,2)` to `(3,1)`.
pub fn example_game(beta: f64) -> Result<VectorGame> {
    VectorGame::new(
        vec![
            vec![vec![0.0, 2.0], vec![2.0, 0.0]],
            vec![vec![2.0, 0.0], vec![4.0, 2.0]],
        ],
        beta,
    )
}

/// Point of the frontier minimizing the largest coordinate.
pub fn minmax_point(v: &Frontier) -> Result<(f64, LossVector)> {
    let hit = frontier_intersect(&ParamPoint::origin(v.dim()), v)?;
    Ok((hit.t, hit.point))
}

/// Minimizes the largest raw coordinate over the hull of a normalized
/// frontier accumulated over `horizon` stages.
///
/// Returns the raw value, the raw point and the normalized line offset used.
pub fn raw_minmax(
    v: &Frontier,
    rec: &NormalizationRecord,
    beta: f64,
    horizon: Option<usize>,
) -> Result<(f64, LossVector, Vec<f64>)> {
    let offset = raw_minmax_offset(rec, beta, horizon)?;
    let hit = line_intersect(&offset, v)?;
    let raw = rec.denormalize(&hit.point, beta, horizon)?;
    let value = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((value, raw, offset))
}

/// Offset `o` such that the normalized line `t·1 + o` is the raw diagonal.
pub fn raw_minmax_offset(rec: &NormalizationRecord, beta: f64, horizon: Option<usize>) -> Result<Vec<f64>> {
    rec.check(rec.shifts.len())?;
    let h = horizon_weight(beta, horizon);
    let lo = rec.shifts.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(rec.shifts.iter().map(|c| (c - lo) * h).collect())
}

/// Vertex minimizing `Σ_k prior_k x_k`; ties go to the lowest index.
pub fn aumann_select(v: &Frontier, prior: &[f64]) -> Result<(usize, LossVector)> {
    if prior.len() != v.dim() {
        return Err(Error::DimensionMismatch { expected: v.dim(), found: prior.len() });
    }
    validate_distribution(prior, "prior")?;
    let mut best = (0, f64::INFINITY);
    for (i, x) in v.vertices().iter().enumerate() {
        let val: f64 = x.iter().zip(prior).map(|(a, b)| a * b).sum();
        if val < best.1 {
            best = (i, val);
        }
    }
    Ok((best.0, v.vertices()[best.0].clone()))
}

pub(crate) fn validate_distribution(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!("{what} has a negative or non-finite weight")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experts2_regret_entries() {
        let g = regret_game(&experts_game(2).unwrap(), 0.5).unwrap();
        assert_eq!(g.loss(0, 0), &[0.0, 1.0]);
        assert_eq!(g.loss(0, 1), &[0.0, -1.0]);
        assert_eq!(g.loss(1, 0), &[-1.0, 0.0]);
        assert_eq!(g.loss(1, 1), &[1.0, 0.0]);
    }

    #[test]
    fn experts3_layout() {
        let e = experts_game(3).unwrap();
        assert_eq!(e.n(), 6);
        assert_eq!(e.column(3), vec![1.0, 1.0, 0.0]);
        for b in 0..6 {
            let ones = e.column(b).iter().filter(|&&x| x == 1.0).count();
            assert!((1..=2).contains(&ones));
        }
        assert_eq!(e.column_of(&[0.0, 1.0, 1.0]), Some(5));
        assert_eq!(e.column_of(&[1.0, 1.0, 1.0]), None);
        assert!(experts_game(4).is_err());
    }

    #[test]
    fn normalize_experts_half() {
        let g = regret_game(&experts_game(2).unwrap(), 0.5).unwrap();
        let (ng, rec) = normalize(&g);
        assert_eq!(rec.scale, 0.25);
        assert_eq!(rec.shifts, vec![0.25, 0.25]);
        for a in 0..2 {
            for b in 0..2 {
                for &x in ng.loss(a, b) {
                    assert!([0.0, 0.25, 0.5].contains(&x));
                }
            }
        }
        assert!(ng.is_normalized(0.0));
    }

    #[test]
    fn normalize_twice_composes() {
        let g = example_game(0.3).unwrap();
        let (n1, r1) = normalize(&g);
        let (n2, r2) = normalize(&n1);
        assert_eq!(n1, n2);
        assert!((r2.scale - 1.0).abs() < 1e-12);
        let both = r2.compose(&r1);
        assert!((both.scale - r1.scale).abs() < 1e-15);
    }

    #[test]
    fn constant_game() {
        let g = VectorGame::new(vec![vec![vec![3.0, 3.0]]], 0.5).unwrap();
        let (ng, rec) = normalize(&g);
        assert_eq!(ng.loss(0, 0), &[0.0, 0.0]);
        let raw = denormalize_vector(&[0.0, 0.0], &rec, 0.5).unwrap();
        assert!(raw.max_abs_diff(&LossVector::new(vec![6.0, 6.0]).unwrap()) < 1e-12);
    }

    #[test]
    fn denormalize_origin() {
        let rec = NormalizationRecord { scale: 0.5, shifts: vec![0.0, 0.0] };
        assert_eq!(denormalize_vector(&[0.0, 0.0], &rec, 0.3).unwrap().as_slice(), &[0.0, 0.0]);
        let bad = NormalizationRecord { scale: 0.0, shifts: vec![0.0] };
        assert!(denormalize_vector(&[0.0], &bad, 0.3).is_err());
    }

    #[test]
    fn minmax_and_aumann() {
        let v = Frontier::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((minmax_point(&v).unwrap().0 - 0.5).abs() < 1e-12);
        let (i, x) = aumann_select(&v, &[0.5, 0.5]).unwrap();
        assert_eq!(i, 0);
        assert_eq!(x.as_slice(), &[0.0, 1.0]);
        assert_eq!(aumann_select(&v, &[1.0, 0.0]).unwrap().0, 0);
        assert_eq!(aumann_select(&v, &[0.0, 1.0]).unwrap().0, 1);
        assert!(aumann_select(&v, &[0.6, 0.6]).is_err());
    }

    #[test]
    fn game_file_round_trip() {
        let g = example_game(0.5).unwrap();
        let text = serde_json::to_string(&g.to_file()).unwrap();
        let back = VectorGame::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}

//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use setdp::game::VectorGame;
use setdp::geometry::{Frontier, LossVector};

/// Random frontier with `n` vertices in `[0, 1]^k`, biased toward the
/// anti-diagonal so most vertices are nondominated.
pub fn random_frontier<R: Rng>(rng: &mut R, k: usize, n: usize) -> Frontier {
    let rows = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            let level = rng.gen_range(0.3..0.7);
            w.iter()
                .map(|x| (x / total * level * k as f64 * 0.8 + rng.gen_range(0.0..0.1)).min(1.0))
                .collect()
        })
        .collect();
    Frontier::from_rows(rows).unwrap()
}

/// Random normalized game with entries in `[0, 1-β]`.
pub fn random_game<R: Rng>(rng: &mut R, m: usize, n: usize, k: usize, beta: f64) -> VectorGame {
    let hi = 1.0 - beta;
    let losses = (0..m)
        .map(|_| (0..n).map(|_| (0..k).map(|_| rng.gen_range(0.0..=hi)).collect()).collect())
        .collect();
    VectorGame::new(losses, beta).unwrap()
}

pub fn weakly_below(u: &[f64], v: &[f64]) -> bool {
    u.iter().zip(v).all(|(a, b)| a <= b)
}

/// Nondominated subset by direct pairwise comparison, first copy of
/// duplicates kept.
pub fn pareto_quadratic(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let beaten = points.iter().enumerate().any(|(j, q)| {
            j != i && weakly_below(q, p) && (q != p || j < i)
        });
        if !beaten {
            out.push(p.clone());
        }
    }
    out
}

/// `min_{h ∈ seg[a,b]} max(h_1 + d_1, h_2 + d_2)`, exact: the objective is the
/// maximum of two affine functions of the segment parameter.
fn segment_minmax(a: &[f64], b: &[f64], d: &[f64]) -> f64 {
    let f = |l: f64| (a[0] + l * (b[0] - a[0]) + d[0]).max(a[1] + l * (b[1] - a[1]) + d[1]);
    let mut best = f(0.0).min(f(1.0));
    let slope = (b[0] - a[0]) - (b[1] - a[1]);
    if slope.abs() > 1e-15 {
        let l = ((a[1] + d[1]) - (a[0] + d[0])) / slope;
        if (0.0..=1.0).contains(&l) {
            best = best.min(f(l));
        }
    }
    best
}

/// `min_{h ∈ hull(V)} max_k (h_k + d_k)` for a planar vertex set: the
/// minimum of a max of two affine maps over a polygon lies on an edge, and
/// every edge is a segment between two vertices.
pub fn hull_minmax_2d(verts: &[LossVector], d: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in verts.iter().enumerate() {
        for b in &verts[i..] {
            best = best.min(segment_minmax(a, b, d));
        }
    }
    best
}

/// Whether `y` weakly dominates some point of the segment `[a, b]`: the
/// parameter intervals where each coordinate fits must overlap.
fn segment_below(a: &[f64], b: &[f64], y: &[f64]) -> bool {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for c in 0..a.len() {
        let slope = b[c] - a[c];
        let room = y[c] - a[c];
        if slope.abs() < 1e-15 {
            if room < 0.0 {
                return false;
            }
        } else if slope > 0.0 {
            hi = hi.min(room / slope);
        } else {
            lo = lo.max(room / slope);
        }
    }
    lo <= hi
}

/// Membership of `y` in the upset of a planar hull.
pub fn in_upset_2d(verts: &[LossVector], y: &[f64]) -> bool {
    verts.iter().enumerate().any(|(i, a)| verts[i..].iter().any(|b| segment_below(a, b, y)))
}

/// `t` where the line `t·1 + p` enters the upset, by bisection on membership.
pub fn bisect_intersect_2d(verts: &[LossVector], p: &[f64]) -> f64 {
    let (mut lo, mut hi) = (-4.0, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let y = [mid + p[0], mid + p[1]];
        if in_upset_2d(verts, &y) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Points on every vertex-pair segment of a planar frontier.
pub fn mesh_2d(verts: &[LossVector], per_segment: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for (i, a) in verts.iter().enumerate() {
        for b in &verts[i..] {
            for s in 0..=per_segment {
                let l = s as f64 / per_segment as f64;
                out.push([a[0] + l * (b[0] - a[0]), a[1] + l * (b[1] - a[1])]);
            }
        }
    }
    out
}

/// Brute-force `e(U, V)` on meshes of both hulls: the largest amount by
/// which a point of `U` must be raised to dominate a point of `V`.
pub fn mesh_e_distance_2d(u: &Frontier, v: &Frontier, per_u: usize, per_v: usize) -> f64 {
    let mv = mesh_2d(v.vertices(), per_v);
    mesh_2d(u.vertices(), per_u)
        .iter()
        .map(|x| {
            mv.iter()
                .map(|y| (y[0] - x[0]).max(y[1] - x[1]))
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Golden-section minimum of a convex function on `[0, 1]`.
pub fn golden_min(f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    f(0.0).min(f(1.0)).min(f(0.5 * (a + b)))
}

/// One-step value along direction `p` for a two-action, two-component game:
/// `min_α max_b min_{q ∈ hull V} max_k (r_k(α, b) + β q_k - p_k)`.
/// The inner expression is jointly convex in `(α, q)`, so its minimum over
/// `q` is convex in `α` and golden-section search finds the outer minimum.
pub fn brute_step_2x2(g: &VectorGame, v: &Frontier, p: &[f64]) -> f64 {
    assert_eq!((g.m(), g.k()), (2, 2));
    let beta = g.beta();
    let verts: Vec<LossVector> =
        v.vertices().iter().map(|x| LossVector::new(x.iter().map(|c| beta * c).collect()).unwrap()).collect();
    golden_min(|a| {
        (0..g.n())
            .map(|b| {
                let d: Vec<f64> = (0..2)
                    .map(|c| (1.0 - a) * g.loss(0, b)[c] + a * g.loss(1, b)[c] - p[c])
                    .collect();
                hull_minmax_2d(&verts, &d)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

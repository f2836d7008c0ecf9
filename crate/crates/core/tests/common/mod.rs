//! Brute-force oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use subdiff_core::analytic_1d::PiecewiseLinearConvexFn;
use subdiff_core::rng::Rng as ChaRng;
use subdiff_core::set_calculus::{ConvexBody, Shape};

pub fn gaussian(rng: &mut ChaRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Least-squares coefficients of `target` on the columns `dirs` via the
/// normal equations; `None` if the columns are (numerically) dependent.
fn least_squares(dirs: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let n = dirs.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| dot(&dirs[i], &dirs[j])).collect();
            row.push(dot(&dirs[i], target));
            row
        })
        .collect();
    let scale: f64 = (0..n).map(|i| m[i][i]).fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-10 * scale {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..n {
        let extra: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut t = s.clone();
                t.push(i);
                t
            })
            .collect();
        out.extend(extra);
    }
    out
}

/// Distance from `y` to `conv(points)`: the closest point lies in the
/// relative interior of a simplex spanned by at most `d + 1` of the points,
/// so every affinely independent subset is tried.
pub fn dist_to_hull(y: &[f64], points: &[Vec<f64>]) -> f64 {
    let d = y.len();
    let mut best = f64::INFINITY;
    for s in subsets(points.len(), d + 1).into_iter().filter(|s| !s.is_empty()) {
        let base = &points[s[0]];
        let dirs: Vec<Vec<f64>> = s[1..]
            .iter()
            .map(|&i| points[i].iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        let target: Vec<f64> = y.iter().zip(base).map(|(a, b)| a - b).collect();
        let Some(coef) = least_squares(&dirs, &target) else {
            continue;
        };
        let first = 1.0 - coef.iter().sum::<f64>();
        if first < -1e-12 || coef.iter().any(|&c| c < -1e-12) {
            continue;
        }
        let mut p = base.clone();
        for (c, dir) in coef.iter().zip(&dirs) {
            p.iter_mut().zip(dir).for_each(|(pi, di)| *pi += c * di);
        }
        best = best.min(dist(&p, y));
    }
    best
}

/// Distance from `y` to a zonotope: the body is the union of the
/// parallelotopes `c + sum_{i not in S} s_i g_i + sum_{i in S} [-1,1] g_i`
/// over independent generator subsets `S` with `|S| <= d`, and the closest
/// point sits in the relative interior of one of their faces.
pub fn dist_to_zonotope(y: &[f64], center: &[f64], gens: &[Vec<f64>]) -> f64 {
    let d = y.len();
    let k = gens.len();
    let mut best = f64::INFINITY;
    for s in subsets(k, d) {
        let rest: Vec<usize> = (0..k).filter(|i| !s.contains(i)).collect();
        let dirs: Vec<Vec<f64>> = s.iter().map(|&i| gens[i].clone()).collect();
        for mask in 0..(1u64 << rest.len()) {
            let mut base = center.to_vec();
            for (bit, &i) in rest.iter().enumerate() {
                let sign = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                base.iter_mut().zip(&gens[i]).for_each(|(b, g)| *b += sign * g);
            }
            let target: Vec<f64> = y.iter().zip(&base).map(|(a, b)| a - b).collect();
            let Some(coef) = least_squares(&dirs, &target) else {
                continue;
            };
            if coef.iter().any(|c| c.abs() > 1.0 + 1e-12) {
                continue;
            }
            let mut p = base;
            for (c, dir) in coef.iter().zip(&dirs) {
                p.iter_mut().zip(dir).for_each(|(pi, di)| *pi += c * di);
            }
            best = best.min(dist(&p, y));
        }
    }
    best
}

pub fn brute_vertices(body: &ConvexBody) -> Vec<Vec<f64>> {
    match body.shape() {
        Shape::Point(p) => vec![p.clone()],
        Shape::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
        Shape::VPolytope(pts) => pts.clone(),
        Shape::Zonotope { center, generators } => (0..(1u64 << generators.len()))
            .map(|mask| {
                let mut v = center.clone();
                for (bit, g) in generators.iter().enumerate() {
                    let s = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                    v.iter_mut().zip(g).for_each(|(vi, gi)| *vi += s * gi);
                }
                v
            })
            .collect(),
    }
}

pub fn brute_dist(y: &[f64], body: &ConvexBody) -> f64 {
    match body.shape() {
        Shape::Zonotope { center, generators } => dist_to_zonotope(y, center, generators),
        _ => dist_to_hull(y, &brute_vertices(body)),
    }
}

pub fn brute_deviation(a: &ConvexBody, b: &ConvexBody) -> f64 {
    brute_vertices(a).iter().map(|v| brute_dist(v, b)).fold(0.0, f64::max)
}

pub fn brute_hausdorff(a: &ConvexBody, b: &ConvexBody) -> f64 {
    brute_deviation(a, b).max(brute_deviation(b, a))
}

/// Hausdorff distance between finite point sets.
pub fn finite_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dev = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        p.iter()
            .map(|x| q.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    dev(a, b).max(dev(b, a))
}

pub fn random_zonotope(rng: &mut ChaRng, d: usize, k: usize) -> ConvexBody {
    let c = gaussian(rng, d);
    let gens = (0..k)
        .map(|_| gaussian(rng, d).into_iter().map(|v| 0.7 * v).collect())
        .collect();
    ConvexBody::zonotope(c, gens).unwrap()
}

pub fn random_vpolytope(rng: &mut ChaRng, d: usize, n: usize) -> ConvexBody {
    let shift = gaussian(rng, d);
    let pts = (0..n)
        .map(|_| gaussian(rng, d).iter().zip(&shift).map(|(a, b)| a + 0.5 * b).collect())
        .collect();
    ConvexBody::vpolytope(pts).unwrap()
}

/// Random zonotope or V-polytope in dimension `d` with at most 8 generators or points.
pub fn random_body(rng: &mut ChaRng, d: usize) -> ConvexBody {
    if rng.gen::<bool>() {
        let k = rng.gen_range(1..=8);
        random_zonotope(rng, d, k)
    } else {
        let n = rng.gen_range(1..=8);
        random_vpolytope(rng, d, n)
    }
}

/// Random convex piecewise-linear function with up to four kinks in (-1, 1).
pub fn random_plc(rng: &mut ChaRng) -> PiecewiseLinearConvexFn {
    let n = rng.gen_range(0..5);
    let mut bps: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut slopes = vec![rng.gen_range(-2.0..2.0)];
    for _ in 0..bps.len() {
        let last = *slopes.last().unwrap();
        slopes.push(last + rng.gen_range(0.0..1.5));
    }
    PiecewiseLinearConvexFn::new(bps, slopes, rng.gen_range(-1.0..1.0)).unwrap()
}

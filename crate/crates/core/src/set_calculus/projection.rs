//! Euclidean projection onto bodies with duality-gap certificates.
//!
//! Zonotopes and V-polytopes are both handled by Wolfe's minimum-norm-point
//! algorithm applied to the translated body `B - y`, which only needs the
//! linear minimization oracle (a sign pattern for zonotopes, a vertex scan
//! for V-polytopes). With `x` the final point and `q = lmo(x)`, the
//! supporting half-space `{p : <p, x> >= <q, x>}` contains the body, so
//! `[<q, x>/||x||, ||x||]` always brackets the true distance.

use super::body::{ConvexBody, Shape};
use crate::error::{check_dim, Result};
use crate::linalg::{dot, norm};

/// Target width of the certified distance bracket.
pub const PROJECTION_TOL: f64 = 1e-9;

const MAX_MAJOR: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Closest point found (exact for points and intervals).
    pub point: Vec<f64>,
    /// Distance from the query to `point`; an upper bound on the distance.
    pub distance: f64,
    /// Certified lower bound on the distance.
    pub lower: f64,
}

impl Projection {
    pub fn certified(&self) -> bool {
        self.distance - self.lower <= PROJECTION_TOL
    }
}

/// Distance from `y` to `body`.
pub fn dist_point_to_body(y: &[f64], body: &ConvexBody) -> Result<f64> {
    Ok(project(y, body)?.distance)
}

pub fn project(y: &[f64], body: &ConvexBody) -> Result<Projection> {
    check_dim(body.dim(), y.len())?;
    Ok(match body.shape() {
        Shape::Point(p) => {
            let d = crate::linalg::dist(p, y);
            Projection {
                point: p.clone(),
                distance: d,
                lower: d,
            }
        }
        Shape::Interval { lo, hi } => {
            let z = y[0].clamp(*lo, *hi);
            let d = (y[0] - z).abs();
            Projection {
                point: vec![z],
                distance: d,
                lower: d,
            }
        }
        Shape::Zonotope { center, generators } => project_zonotope(y, center, generators),
        Shape::VPolytope(points) => project_vpolytope(y, points),
    })
}

fn project_zonotope(y: &[f64], center: &[f64], gens: &[Vec<f64>]) -> Projection {
    if gens.is_empty() {
        let dd = crate::linalg::dist(center, y);
        return Projection {
            point: center.to_vec(),
            distance: dd,
            lower: dd,
        };
    }
    let shift: Vec<f64> = center.iter().zip(y).map(|(c, v)| c - v).collect();
    let scale = norm(&shift) + gens.iter().map(|g| norm(g)).sum::<f64>();
    let lmo = |u: &[f64]| {
        let mut p = shift.clone();
        for g in gens {
            let s = if dot(g, u) > 0.0 { -1.0 } else { 1.0 };
            p.iter_mut().zip(g).for_each(|(pi, gi)| *pi += s * gi);
        }
        p
    };
    finish(y, min_norm_point(lmo, &shift, scale))
}

fn project_vpolytope(y: &[f64], pts: &[Vec<f64>]) -> Projection {
    let shifted: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| p.iter().zip(y).map(|(a, b)| a - b).collect())
        .collect();
    let scale = shifted.iter().map(|p| norm(p)).fold(0.0, f64::max);
    let lmo = |u: &[f64]| {
        shifted
            .iter()
            .min_by(|a, b| dot(a, u).total_cmp(&dot(b, u)))
            .expect("nonempty polytope")
            .clone()
    };
    let start = shifted
        .iter()
        .min_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
        .expect("nonempty polytope")
        .clone();
    finish(y, min_norm_point(lmo, &start, scale))
}

fn finish(y: &[f64], (x, lower): (Vec<f64>, f64)) -> Projection {
    let distance = norm(&x);
    Projection {
        point: y.iter().zip(&x).map(|(a, b)| a + b).collect(),
        distance,
        lower: lower.min(distance),
    }
}

/// Wolfe's minimum-norm-point algorithm on the polytope described by its
/// linear minimization oracle `lmo(u) = argmin_p <p, u>`. Returns the point
/// and the lower bound `<x, q> / ||x||` with `q = lmo(x)`.
fn min_norm_point(lmo: impl Fn(&[f64]) -> Vec<f64>, start: &[f64], scale: f64) -> (Vec<f64>, f64) {
    let first = lmo(start);
    let d = first.len();
    let mut corral = vec![first];
    let mut weights = vec![1.0];
    let mut x = corral[0].clone();
    let eps = 1e-15 * scale.max(f64::MIN_POSITIVE);
    let mut lower = 0.0;
    for _ in 0..MAX_MAJOR {
        let xn = norm(&x);
        if xn <= eps {
            return (x, 0.0);
        }
        let q = lmo(&x);
        let xq = dot(&x, &q);
        lower = (xq / xn).max(0.0);
        if xn * xn - xq <= eps * xn || corral.iter().any(|p| p == &q) || corral.len() > d + 1 {
            break;
        }
        corral.push(q);
        weights.push(0.0);
        loop {
            let Some(alpha) = affine_min_norm(&corral) else {
                break;
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                weights = alpha;
                x = combine(&corral, &weights, d);
                break;
            }
            let mut theta: f64 = 1.0;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= 1e-14 && w - a > 0.0 {
                    theta = theta.min(w / (w - a));
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = (1.0 - theta) * *w + theta * a;
            }
            let mut i = 0;
            while i < corral.len() {
                if weights[i] <= 1e-14 {
                    corral.swap_remove(i);
                    weights.swap_remove(i);
                } else {
                    i += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            x = combine(&corral, &weights, d);
            if corral.len() <= 1 {
                break;
            }
        }
    }
    (x, lower)
}

fn combine(points: &[Vec<f64>], weights: &[f64], d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for (p, w) in points.iter().zip(weights) {
        crate::linalg::axpy(*w, p, &mut x);
    }
    x
}

/// Weights of the minimum-norm point of the affine hull of `points`.
fn affine_min_norm(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = points.len();
    let mut kkt = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..n {
        for j in 0..n {
            kkt[i * (n + 1) + j] = dot(&points[i], &points[j]);
        }
        kkt[i * (n + 1) + n] = 1.0;
        kkt[n * (n + 1) + i] = 1.0;
    }
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let sol = crate::linalg::solve(kkt, rhs)?;
    let alpha = sol[..n].to_vec();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

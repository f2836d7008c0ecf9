use super::body::{ConvexBody, Shape, MAX_EXACT_GENERATORS};
use super::directions::{sampling_grid, ASCENT_STEPS};
use super::hull::monotone_chain;
use super::projection::project;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};

/// Seed for the sampled direction grids in `d > 3`.
const DIRECTION_SEED: u64 = 0x00d1_7ec7;

/// Outcome of a deviation computation `D(A, B) = sup_{a in A} dist(a, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub value: f64,
    /// Every extreme point of `A` was examined and every projection was
    /// certified.
    pub exact: bool,
    /// Number of candidate points of `A` examined.
    pub evaluated: usize,
    /// Point of `A` attaining `value`.
    pub witness: Vec<f64>,
}

/// Deviation of `a` from `b`. Extreme points of `a` are enumerated when the
/// body allows it; otherwise support points of `a` along sampled directions
/// are used and the result is a lower bound flagged as approximate.
pub fn deviation(a: &ConvexBody, b: &ConvexBody) -> Result<Deviation> {
    check_dim(a.dim(), b.dim())?;
    let (candidates, mut exact) = match a.vertices() {
        Some(v) => (v, true),
        None => {
            let dirs = sampling_grid(a.dim(), DIRECTION_SEED);
            (dirs.iter().map(|u| a.support_point(u)).collect(), false)
        }
    };
    let mut best = Deviation {
        value: 0.0,
        exact,
        evaluated: candidates.len(),
        witness: candidates[0].clone(),
    };
    let mut best_val = f64::NEG_INFINITY;
    for p in candidates {
        let proj = project(&p, b)?;
        exact &= proj.certified();
        if proj.distance > best_val {
            best_val = proj.distance;
            best.witness = p;
        }
    }
    best.value = best_val.max(0.0);
    best.exact = exact;
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HausdorffReport {
    pub value: f64,
    pub exact: bool,
    pub forward: Deviation,
    pub backward: Deviation,
}

/// Hausdorff distance `max{D(A,B), D(B,A)}`.
pub fn hausdorff(a: &ConvexBody, b: &ConvexBody) -> Result<f64> {
    Ok(hausdorff_report(a, b)?.value)
}

pub fn hausdorff_report(a: &ConvexBody, b: &ConvexBody) -> Result<HausdorffReport> {
    let forward = deviation(a, b)?;
    let backward = deviation(b, a)?;
    Ok(HausdorffReport {
        value: forward.value.max(backward.value),
        exact: forward.exact && backward.exact,
        forward,
        backward,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportRoute {
    pub value: f64,
    /// True when the direction search provably covers the maximizer
    /// (dimension one or two with enumerable vertices).
    pub exact: bool,
    pub directions: usize,
}

/// Hausdorff distance as `sup_{|u|=1} |h_A(u) - h_B(u)|`.
///
/// In `d = 1` the two unit directions suffice. In `d = 2` the maximum is
/// attained either where a support argmax switches (normals to vertex
/// differences) or at `+-(a - b)/|a - b|` for a pair of active vertices, so
/// that finite candidate set is exact. In `d >= 3` a direction grid plus
/// projected ascent gives a lower bound.
pub fn hausdorff_support(a: &ConvexBody, b: &ConvexBody) -> Result<SupportRoute> {
    check_dim(a.dim(), b.dim())?;
    let d = a.dim();
    let gap = |u: &[f64]| (a.support_raw(u) - b.support_raw(u)).abs();
    if d == 1 {
        let v = gap(&[1.0]).max(gap(&[-1.0]));
        return Ok(SupportRoute {
            value: v,
            exact: true,
            directions: 2,
        });
    }
    if d == 2 {
        if let (Some(va), Some(vb)) = (planar_vertices(a), planar_vertices(b)) {
            let mut cands: Vec<[f64; 2]> = Vec::new();
            for set in [&va, &vb] {
                for i in 0..set.len() {
                    for j in i + 1..set.len() {
                        let e = [set[j][0] - set[i][0], set[j][1] - set[i][1]];
                        cands.push([-e[1], e[0]]);
                        cands.push([e[1], -e[0]]);
                    }
                }
            }
            for p in &va {
                for q in &vb {
                    let e = [p[0] - q[0], p[1] - q[1]];
                    cands.push(e);
                    cands.push([-e[0], -e[1]]);
                }
            }
            cands.push([1.0, 0.0]);
            let mut best: f64 = 0.0;
            let mut n = 0;
            for c in cands {
                let nc = c[0].hypot(c[1]);
                if nc == 0.0 {
                    continue;
                }
                let u = [c[0] / nc, c[1] / nc];
                best = best.max(gap(&u));
                n += 1;
            }
            return Ok(SupportRoute {
                value: best,
                exact: true,
                directions: n,
            });
        }
    }
    let grid = sampling_grid(d, DIRECTION_SEED);
    let mut scored: Vec<(f64, usize)> = grid.iter().enumerate().map(|(i, u)| (gap(u), i)).collect();
    scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = scored.first().map(|s| s.0).unwrap_or(0.0);
    let mut evals = grid.len();
    for &(_, idx) in scored.iter().take(5) {
        let mut u = grid[idx].clone();
        let mut step = 0.1;
        for _ in 0..ASCENT_STEPS {
            let f = a.support_raw(&u) - b.support_raw(&u);
            let pa = a.support_point(&u);
            let pb = b.support_point(&u);
            let mut s: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| f.signum() * (x - y)).collect();
            let radial = dot(&s, &u);
            for (si, ui) in s.iter_mut().zip(&u) {
                *si -= radial * ui;
            }
            let ns = norm(&s);
            if ns < 1e-15 {
                break;
            }
            let cand: Vec<f64> = u.iter().zip(&s).map(|(x, y)| x + step * y / ns).collect();
            let nc = norm(&cand);
            let cand: Vec<f64> = cand.into_iter().map(|x| x / nc).collect();
            evals += 1;
            let v = gap(&cand);
            if v > gap(&u) {
                u = cand;
                best = best.max(v);
            } else {
                step *= 0.5;
            }
        }
    }
    Ok(SupportRoute {
        value: best,
        exact: false,
        directions: evals,
    })
}

fn planar_vertices(body: &ConvexBody) -> Option<Vec<[f64; 2]>> {
    let v = body.vertices()?;
    let pts: Vec<[f64; 2]> = v.iter().map(|p| [p[0], p[1]]).collect();
    Some(if pts.len() > 3 { monotone_chain(&pts) } else { pts })
}

/// Exact Minkowski sum for representable variant pairs.
pub fn minkowski_sum(a: &ConvexBody, b: &ConvexBody) -> Result<ConvexBody> {
    check_dim(a.dim(), b.dim())?;
    match (a.shape(), b.shape()) {
        (Shape::Point(p), _) => translate(b, p),
        (_, Shape::Point(q)) => translate(a, q),
        (Shape::Interval { lo: l1, hi: h1 }, Shape::Interval { lo: l2, hi: h2 }) => {
            ConvexBody::interval(l1 + l2, h1 + h2)
        }
        (Shape::VPolytope(pa), Shape::VPolytope(pb)) => pairwise_sums(pa, pb),
        _ => {
            if let (Some((ca, ga)), Some((cb, gb))) = (a.as_zonotope(), b.as_zonotope()) {
                let c: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x + y).collect();
                let mut g = ga;
                g.extend(gb);
                return ConvexBody::zonotope(c, g);
            }
            // One polytope, one zonotope-like body.
            let va = a.vertices();
            let vb = b.vertices();
            let small = |body: &ConvexBody| match body.shape() {
                Shape::Zonotope { generators, .. } => generators.len() <= MAX_EXACT_GENERATORS,
                _ => true,
            };
            match (va, vb) {
                (Some(va), Some(vb)) if small(a) && small(b) => pairwise_sums(&va, &vb),
                _ => Err(Error::UnsupportedVariants {
                    op: "minkowski_sum",
                    lhs: a.variant_name(),
                    rhs: b.variant_name(),
                }),
            }
        }
    }
}

fn translate(body: &ConvexBody, p: &[f64]) -> Result<ConvexBody> {
    match body.shape() {
        Shape::Point(q) => ConvexBody::point(q.iter().zip(p).map(|(x, y)| x + y).collect()),
        Shape::Interval { lo, hi } => ConvexBody::interval(lo + p[0], hi + p[0]),
        Shape::VPolytope(pts) => ConvexBody::vpolytope(
            pts.iter()
                .map(|q| q.iter().zip(p).map(|(x, y)| x + y).collect())
                .collect(),
        ),
        Shape::Zonotope { center, generators } => {
            ConvexBody::zonotope(center.iter().zip(p).map(|(x, y)| x + y).collect(), generators.clone())
        }
    }
}

fn pairwise_sums(pa: &[Vec<f64>], pb: &[Vec<f64>]) -> Result<ConvexBody> {
    let mut out = Vec::with_capacity(pa.len() * pb.len());
    for p in pa {
        for q in pb {
            out.push(p.iter().zip(q).map(|(x, y)| x + y).collect::<Vec<f64>>());
        }
    }
    if out[0].len() == 2 {
        super::hull::convex_hull(&out)
    } else {
        ConvexBody::vpolytope(out)
    }
}

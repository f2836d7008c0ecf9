use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};

/// Largest generator count for which zonotope vertices are enumerated
/// through all sign patterns.
pub const MAX_EXACT_GENERATORS: usize = 20;

const DIRECTION_TOL: f64 = 1e-12;

/// Representation of a compact convex set.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Point(Vec<f64>),
    Interval {
        lo: f64,
        hi: f64,
    },
    VPolytope(Vec<Vec<f64>>),
    /// `{ center + sum_i lambda_i g_i : lambda_i in [-1, 1] }`
    Zonotope {
        center: Vec<f64>,
        generators: Vec<Vec<f64>>,
    },
}

/// A nonempty compact convex subset of `R^d`.
///
/// Bodies are immutable once built. Constructors validate shared dimension
/// and normalize degenerate input: zero generators are dropped and
/// duplicate polytope points are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    shape: Shape,
    dim: usize,
}

impl ConvexBody {
    pub fn point(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidBody("point of dimension 0".into()));
        }
        check_finite(&p)?;
        let dim = p.len();
        Ok(Self {
            shape: Shape::Point(p),
            dim,
        })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidBody("non-finite interval endpoint".into()));
        }
        if lo > hi {
            return Err(Error::InvalidBody(format!("interval with lo {lo} > hi {hi}")));
        }
        Ok(Self {
            shape: Shape::Interval { lo, hi },
            dim: 1,
        })
    }

    pub fn vpolytope(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput("vpolytope point list"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidBody("points of dimension 0".into()));
        }
        let mut uniq: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            check_dim(dim, p.len())?;
            check_finite(&p)?;
            if !uniq.iter().any(|q| *q == p) {
                uniq.push(p);
            }
        }
        Ok(Self {
            shape: Shape::VPolytope(uniq),
            dim,
        })
    }

    pub fn zonotope(center: Vec<f64>, generators: Vec<Vec<f64>>) -> Result<Self> {
        let dim = center.len();
        if dim == 0 {
            return Err(Error::InvalidBody("zonotope of dimension 0".into()));
        }
        check_finite(&center)?;
        let mut kept = Vec::with_capacity(generators.len());
        for g in generators {
            check_dim(dim, g.len())?;
            check_finite(&g)?;
            if g.iter().any(|&v| v != 0.0) {
                kept.push(g);
            }
        }
        Ok(Self {
            shape: Shape::Zonotope {
                center,
                generators: kept,
            },
            dim,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant_name(&self) -> &'static str {
        match self.shape {
            Shape::Point(_) => "Point",
            Shape::Interval { .. } => "Interval1D",
            Shape::VPolytope(_) => "VPolytope",
            Shape::Zonotope { .. } => "Zonotope",
        }
    }

    /// Support function without the unit-norm requirement on `u`.
    pub(crate) fn support_raw(&self, u: &[f64]) -> f64 {
        match &self.shape {
            Shape::Point(p) => dot(p, u),
            Shape::Interval { lo, hi } => (lo * u[0]).max(hi * u[0]),
            Shape::VPolytope(pts) => pts.iter().map(|p| dot(p, u)).fold(f64::NEG_INFINITY, f64::max),
            Shape::Zonotope { center, generators } => {
                dot(center, u) + generators.iter().map(|g| dot(g, u).abs()).sum::<f64>()
            }
        }
    }

    /// A point of the body attaining the support value in direction `u`.
    pub(crate) fn support_point(&self, u: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Point(p) => p.clone(),
            Shape::Interval { lo, hi } => vec![if u[0] >= 0.0 { *hi } else { *lo }],
            Shape::VPolytope(pts) => {
                let mut best = &pts[0];
                let mut best_v = dot(best, u);
                for p in &pts[1..] {
                    let v = dot(p, u);
                    if v > best_v {
                        best = p;
                        best_v = v;
                    }
                }
                best.clone()
            }
            Shape::Zonotope { center, generators } => {
                let mut p = center.clone();
                for g in generators {
                    let s = if dot(g, u) >= 0.0 { 1.0 } else { -1.0 };
                    crate::linalg::axpy(s, g, &mut p);
                }
                p
            }
        }
    }

    /// Whether `vertices` enumerates every extreme point.
    pub fn has_exact_vertices(&self) -> bool {
        match &self.shape {
            Shape::Zonotope { generators, .. } => self.dim <= 2 || generators.len() <= MAX_EXACT_GENERATORS,
            _ => true,
        }
    }

    /// A finite point set whose convex hull is the body, when one can be
    /// listed within the enumeration cap. For zonotopes in `d <= 2` only
    /// the true vertices are returned; otherwise all sign patterns.
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        match &self.shape {
            Shape::Point(p) => Some(vec![p.clone()]),
            Shape::Interval { lo, hi } => {
                if lo == hi {
                    Some(vec![vec![*lo]])
                } else {
                    Some(vec![vec![*lo], vec![*hi]])
                }
            }
            Shape::VPolytope(pts) => Some(pts.clone()),
            Shape::Zonotope { center, generators } => {
                if generators.is_empty() {
                    return Some(vec![center.clone()]);
                }
                match self.dim {
                    1 => {
                        let w: f64 = generators.iter().map(|g| g[0].abs()).sum();
                        Some(vec![vec![center[0] - w], vec![center[0] + w]])
                    }
                    2 => Some(zonotope_vertices_2d(center, generators)),
                    _ if generators.len() <= MAX_EXACT_GENERATORS => Some(sign_pattern_points(center, generators)),
                    _ => None,
                }
            }
        }
    }

    /// Express the body as a zonotope when possible (points, intervals and
    /// zonotopes).
    pub(crate) fn as_zonotope(&self) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        match &self.shape {
            Shape::Point(p) => Some((p.clone(), Vec::new())),
            Shape::Interval { lo, hi } => {
                let c = 0.5 * (lo + hi);
                let h = 0.5 * (hi - lo);
                let gens = if h > 0.0 { vec![vec![h]] } else { Vec::new() };
                Some((vec![c], gens))
            }
            Shape::Zonotope { center, generators } => Some((center.clone(), generators.clone())),
            Shape::VPolytope(_) => None,
        }
    }

    /// Largest distance from the origin to a point of the body (upper bound
    /// for zonotopes).
    pub fn radius_bound(&self) -> f64 {
        match &self.shape {
            Shape::Point(p) => norm(p),
            Shape::Interval { lo, hi } => lo.abs().max(hi.abs()),
            Shape::VPolytope(pts) => pts.iter().map(|p| norm(p)).fold(0.0, f64::max),
            Shape::Zonotope { center, generators } => norm(center) + generators.iter().map(|g| norm(g)).sum::<f64>(),
        }
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidBody("non-finite coordinate".into()))
    }
}

fn sign_pattern_points(center: &[f64], generators: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = generators.len();
    let d = center.len();
    let mut out = Vec::with_capacity(1 << k);
    for mask in 0u64..(1u64 << k) {
        let mut p = center.to_vec();
        for (i, g) in generators.iter().enumerate() {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            for j in 0..d {
                p[j] += s * g[j];
            }
        }
        out.push(p);
    }
    out
}

/// Vertices of a planar zonotope in counter-clockwise order: orient every
/// generator into the upper half-plane, sort by angle, and walk the
/// boundary.
fn zonotope_vertices_2d(center: &[f64], generators: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut gens: Vec<[f64; 2]> = generators
        .iter()
        .map(|g| {
            if g[1] < 0.0 || (g[1] == 0.0 && g[0] < 0.0) {
                [-g[0], -g[1]]
            } else {
                [g[0], g[1]]
            }
        })
        .collect();
    gens.sort_by(|a, b| {
        a[1].atan2(a[0])
            .partial_cmp(&b[1].atan2(b[0]))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    // Merge parallel generators.
    let mut merged: Vec<[f64; 2]> = Vec::with_capacity(gens.len());
    for g in gens {
        if let Some(last) = merged.last_mut() {
            let cross = last[0] * g[1] - last[1] * g[0];
            let scale = (last[0].hypot(last[1])) * (g[0].hypot(g[1]));
            if cross.abs() <= 1e-14 * scale {
                last[0] += g[0];
                last[1] += g[1];
                continue;
            }
        }
        merged.push(g);
    }
    // Lowest vertex: subtract every upper-half-plane generator.
    let mut p = [center[0], center[1]];
    for g in &merged {
        p[0] -= g[0];
        p[1] -= g[1];
    }
    let mut out = Vec::with_capacity(2 * merged.len());
    for g in &merged {
        out.push(vec![p[0], p[1]]);
        p[0] += 2.0 * g[0];
        p[1] += 2.0 * g[1];
    }
    for g in &merged {
        out.push(vec![p[0], p[1]]);
        p[0] -= 2.0 * g[0];
        p[1] -= 2.0 * g[1];
    }
    out
}

/// A unit vector used to probe support functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Accepts `u` only if `| ||u|| - 1 | <= 1e-12`.
    pub fn new(u: Vec<f64>) -> Result<Self> {
        let n = norm(&u);
        if (n - 1.0).abs() > DIRECTION_TOL {
            return Err(Error::Domain(format!("direction norm {n} is not 1")));
        }
        Ok(Self(u))
    }

    /// Rescales a nonzero vector to unit length.
    pub fn normalized(u: &[f64]) -> Result<Self> {
        let n = norm(u);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Ok(Self(u.iter().map(|v| v / n).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Support function `sup_{a in body} <a, u>`.
pub fn support(body: &ConvexBody, u: &Direction) -> Result<f64> {
    check_dim(body.dim(), u.dim())?;
    Ok(body.support_raw(u.as_slice()))
}

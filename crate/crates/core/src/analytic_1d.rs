//! Exact one-dimensional piecewise-linear convex functions: subdifferentials,
//! the pointwise metric `d1`, the graphical metric `d2` and selection gaps.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar_loss::ScalarConvexLoss;
use crate::set_calculus::ConvexBody;

/// `f(x) = f(0) + int_0^x slope(s) ds` with `slopes[i]` on the `i`-th piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearConvexFn {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    value_at_zero: f64,
}

impl PiecewiseLinearConvexFn {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, value_at_zero: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::Domain(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if breakpoints.iter().chain(&slopes).any(|v| !v.is_finite()) || !value_at_zero.is_finite() {
            return Err(Error::Domain("non-finite piecewise-linear data".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("slopes must be nondecreasing".into()));
        }
        Ok(Self {
            breakpoints,
            slopes,
            value_at_zero,
        })
    }

    /// `alpha |x - shift|`
    pub fn scaled_abs(alpha: f64, shift: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::Domain(format!("scale {alpha} must be nonnegative")));
        }
        Self::new(vec![shift], vec![-alpha, alpha], alpha * shift.abs())
    }

    pub fn abs() -> Self {
        Self::scaled_abs(1.0, 0.0).expect("valid")
    }

    /// `1/2 |x - 1/n| + 1/2 |x + 1/n|`
    pub fn two_kink(n: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(Error::Domain(format!("n = {n} must be positive")));
        }
        Self::new(vec![-1.0 / n, 1.0 / n], vec![-1.0, 0.0, 1.0], 1.0 / n)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Index of the piece containing `x` (pieces are closed on the left).
    fn piece(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&t| t <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        // integrate the slope from 0 to x
        let (lo, hi, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let mut total = 0.0;
        let mut left = lo;
        let mut k = self.piece(lo);
        while left < hi {
            let right = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY).min(hi);
            total += self.slopes[k] * (right - left);
            left = right;
            k += 1;
        }
        self.value_at_zero + sign * total
    }

    /// `[f'_-(x), f'_+(x)]`
    pub fn one_sided(&self, x: f64) -> (f64, f64) {
        let k = self.piece(x);
        let at_break = k > 0 && self.breakpoints[k - 1] == x;
        if at_break {
            (self.slopes[k - 1], self.slopes[k])
        } else {
            (self.slopes[k], self.slopes[k])
        }
    }

    pub fn exact_subdiff(&self, x: f64) -> ConvexBody {
        let (lo, hi) = self.one_sided(x);
        ConvexBody::interval(lo, hi).expect("slopes are ordered")
    }

    /// The same function as a [`ScalarConvexLoss`].
    pub fn to_loss(&self) -> Result<ScalarConvexLoss> {
        ScalarConvexLoss::piecewise_linear(&self.breakpoints, &self.slopes, self.value_at_zero)
    }
}

/// `exact_subdiff` as a free function.
pub fn exact_subdiff(f: &PiecewiseLinearConvexFn, x: f64) -> ConvexBody {
    f.exact_subdiff(x)
}

fn check_window(a: f64, b: f64) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("window ({a}, {b}) must be finite with a < b")));
    }
    Ok(())
}

/// Breakpoints of both functions strictly inside `(a, b)`, plus one interior
/// point of every gap between consecutive such points (and the window ends).
fn candidate_points(fs: &[&PiecewiseLinearConvexFn], a: f64, b: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = fs
        .iter()
        .flat_map(|f| f.breakpoints.iter().copied())
        .filter(|&t| t > a && t < b)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut fences = vec![a];
    fences.extend(&pts);
    fences.push(b);
    pts.extend(fences.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    pts.sort_by(f64::total_cmp);
    pts
}

fn interval_hausdorff((l1, h1): (f64, f64), (l2, h2): (f64, f64)) -> f64 {
    (l1 - l2).abs().max((h1 - h2).abs())
}

/// `d1 = sup_{x in (a,b)} H(df1(x), df2(x))`, exact.
pub fn d1_metric(f1: &PiecewiseLinearConvexFn, f2: &PiecewiseLinearConvexFn, (a, b): (f64, f64)) -> Result<f64> {
    check_window(a, b)?;
    Ok(candidate_points(&[f1, f2], a, b)
        .into_iter()
        .map(|x| interval_hausdorff(f1.one_sided(x), f2.one_sided(x)))
        .fold(0.0, f64::max))
}

/// `max_{x in points} H(df1(x), df2(x))` on a finite (closed) set.
pub fn hausdorff_on_points(f1: &PiecewiseLinearConvexFn, f2: &PiecewiseLinearConvexFn, points: &[f64]) -> f64 {
    points
        .iter()
        .map(|&x| interval_hausdorff(f1.one_sided(x), f2.one_sided(x)))
        .fold(0.0, f64::max)
}

/// Choice of subgradient at each point.
#[derive(Clone)]
pub enum SelectionRule {
    /// The right derivative `f'_+(x)`.
    RightDerivative,
    /// `rule(which, x, lo, hi)` for function `which` in `{0, 1}`; must
    /// return a value in `[lo, hi]`.
    Custom(Arc<dyn Fn(usize, f64, f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionRule::RightDerivative => write!(f, "RightDerivative"),
            SelectionRule::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl SelectionRule {
    fn select(&self, which: usize, f: &PiecewiseLinearConvexFn, x: f64) -> Result<f64> {
        let (lo, hi) = f.one_sided(x);
        match self {
            SelectionRule::RightDerivative => Ok(hi),
            SelectionRule::Custom(rule) => {
                let g = rule(which, x, lo, hi);
                if g < lo || g > hi || g.is_nan() {
                    return Err(Error::Domain(format!("selection {g} outside [{lo}, {hi}] at x = {x}")));
                }
                Ok(g)
            }
        }
    }
}

/// `sup_{x in (a,b)} |g1(x) - g2(x)|`, exact: off the breakpoints both
/// selections are forced, so the candidate set of [`d1_metric`] suffices.
pub fn selection_sup_diff(
    f1: &PiecewiseLinearConvexFn,
    f2: &PiecewiseLinearConvexFn,
    (a, b): (f64, f64),
    rule: &SelectionRule,
) -> Result<f64> {
    check_window(a, b)?;
    selection_diff_on_points(f1, f2, &candidate_points(&[f1, f2], a, b), rule)
}

/// `max_{x in points} |g1(x) - g2(x)|` on a finite set.
pub fn selection_diff_on_points(
    f1: &PiecewiseLinearConvexFn,
    f2: &PiecewiseLinearConvexFn,
    points: &[f64],
    rule: &SelectionRule,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for &x in points {
        best = best.max((rule.select(0, f1, x)? - rule.select(1, f2, x)?).abs());
    }
    Ok(best)
}

/// Segment `p0 + s (p1 - p0)`, `s in [0, 1]`, in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
}

/// The graph `{(x, y) : x in (a, b), y in df(x)}` as horizontal pieces and
/// vertical jumps at interior breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdiffGraph {
    pub segments: Vec<Segment>,
}

impl SubdiffGraph {
    pub fn new(f: &PiecewiseLinearConvexFn, (a, b): (f64, f64)) -> Result<Self> {
        check_window(a, b)?;
        let inner: Vec<usize> = (0..f.breakpoints.len())
            .filter(|&i| f.breakpoints[i] > a && f.breakpoints[i] < b)
            .collect();
        let mut segments = Vec::new();
        let mut left = a;
        // pieces are closed on the left, so a breakpoint at `a` stays outside
        let mut piece = f.piece(a);
        for &i in &inner {
            let t = f.breakpoints[i];
            segments.push(Segment {
                p0: [left, f.slopes[i]],
                p1: [t, f.slopes[i]],
            });
            if f.slopes[i] < f.slopes[i + 1] {
                segments.push(Segment {
                    p0: [t, f.slopes[i]],
                    p1: [t, f.slopes[i + 1]],
                });
            }
            left = t;
            piece = i + 1;
        }
        segments.push(Segment {
            p0: [left, f.slopes[piece]],
            p1: [b, f.slopes[piece]],
        });
        Ok(Self { segments })
    }

    pub fn dist(&self, p: [f64; 2]) -> f64 {
        self.segments
            .iter()
            .map(|s| seg_dist2(p, s).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

fn seg_dist2(p: [f64; 2], s: &Segment) -> f64 {
    let w = [s.p1[0] - s.p0[0], s.p1[1] - s.p0[1]];
    let ww = w[0] * w[0] + w[1] * w[1];
    let r = [p[0] - s.p0[0], p[1] - s.p0[1]];
    let t = if ww > 0.0 {
        ((r[0] * w[0] + r[1] * w[1]) / ww).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = r[0] - t * w[0];
    let dy = r[1] - t * w[1];
    dx * dx + dy * dy
}

/// `dist(p(t), s)^2` for `p(t) = p + t e`, as quadratic pieces
/// `(t_lo, t_hi, [A, B, C])` meaning `A t^2 + B t + C`.
fn dist2_pieces(p: [f64; 2], e: [f64; 2], len: f64, s: &Segment) -> Vec<(f64, f64, [f64; 3])> {
    let w = [s.p1[0] - s.p0[0], s.p1[1] - s.p0[1]];
    let ww = w[0] * w[0] + w[1] * w[1];
    let fixed = |q: [f64; 2]| {
        let r = [p[0] - q[0], p[1] - q[1]];
        [
            e[0] * e[0] + e[1] * e[1],
            2.0 * (r[0] * e[0] + r[1] * e[1]),
            r[0] * r[0] + r[1] * r[1],
        ]
    };
    if ww == 0.0 {
        return vec![(0.0, len, fixed(s.p0))];
    }
    // projection parameter sigma(t) = (<p - p0, w> + t <e, w>) / ww
    let s0 = ((p[0] - s.p0[0]) * w[0] + (p[1] - s.p0[1]) * w[1]) / ww;
    let s1 = (e[0] * w[0] + e[1] * w[1]) / ww;
    let mut cuts = vec![0.0, len];
    if s1 != 0.0 {
        for target in [0.0, 1.0] {
            let t = (target - s0) / s1;
            if t > 0.0 && t < len {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for c in cuts.windows(2) {
        let mid = 0.5 * (c[0] + c[1]);
        let sig = s0 + s1 * mid;
        let coef = if sig <= 0.0 {
            fixed(s.p0)
        } else if sig >= 1.0 {
            fixed(s.p1)
        } else {
            // residual (I - w w^T / ww)(p - p0 + t e)
            let proj = |v: [f64; 2]| {
                let k = (v[0] * w[0] + v[1] * w[1]) / ww;
                [v[0] - k * w[0], v[1] - k * w[1]]
            };
            let r = proj([p[0] - s.p0[0], p[1] - s.p0[1]]);
            let pe = proj(e);
            [
                pe[0] * pe[0] + pe[1] * pe[1],
                2.0 * (r[0] * pe[0] + r[1] * pe[1]),
                r[0] * r[0] + r[1] * r[1],
            ]
        };
        out.push((c[0], c[1], coef));
    }
    if out.is_empty() {
        out.push((0.0, len, fixed(s.p0)));
    }
    out
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        return if b.abs() > 1e-14 * scale {
            vec![-c / b]
        } else {
            Vec::new()
        };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut r = vec![q / a];
    if q != 0.0 {
        r.push(c / q);
    }
    r
}

/// `sup_{p in seg} dist(p, graph)`: the lower envelope of the convex
/// functions `t -> dist(p(t), s_j)` peaks at an endpoint or where two of them
/// cross, so those parameters are the only candidates.
fn segment_deviation(seg: &Segment, graph: &SubdiffGraph) -> f64 {
    let d = [seg.p1[0] - seg.p0[0], seg.p1[1] - seg.p0[1]];
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return graph.dist(seg.p0);
    }
    let e = [d[0] / len, d[1] / len];
    let pieces: Vec<Vec<(f64, f64, [f64; 3])>> =
        graph.segments.iter().map(|s| dist2_pieces(seg.p0, e, len, s)).collect();
    let mut cands = vec![0.0, len];
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            for &(a0, a1, ca) in &pieces[i] {
                for &(b0, b1, cb) in &pieces[j] {
                    let (lo, hi) = (a0.max(b0), a1.min(b1));
                    if lo > hi {
                        continue;
                    }
                    for t in quadratic_roots(ca[0] - cb[0], ca[1] - cb[1], ca[2] - cb[2]) {
                        if t >= lo && t <= hi {
                            cands.push(t);
                        }
                    }
                }
            }
        }
    }
    cands
        .into_iter()
        .map(|t| graph.dist([seg.p0[0] + t * e[0], seg.p0[1] + t * e[1]]))
        .fold(0.0, f64::max)
}

/// Graphical distance `d2 = H(gph df1, gph df2)` over the window, exact up
/// to rounding.
pub fn d2_graph_metric(f1: &PiecewiseLinearConvexFn, f2: &PiecewiseLinearConvexFn, window: (f64, f64)) -> Result<f64> {
    let g1 = SubdiffGraph::new(f1, window)?;
    let g2 = SubdiffGraph::new(f2, window)?;
    let dev =
        |a: &SubdiffGraph, b: &SubdiffGraph| a.segments.iter().map(|s| segment_deviation(s, b)).fold(0.0, f64::max);
    Ok(dev(&g1, &g2).max(dev(&g2, &g1)))
}

//! Sign patterns, shattering certificates and VC bounds for threshold
//! classes `{xi : c(x; xi) >= t}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{CompositeModel, SampleXi};
use crate::rng::{rng_from, Rng};

/// Largest point set `check_shatter` enumerates (`2^16` labelings).
pub const MAX_SHATTER_POINTS: usize = 16;

type CustomC = Arc<dyn Fn(&[f64], &SampleXi) -> f64 + Send + Sync>;

/// The class `F = {{xi : c(x; xi) >= t} : x in R^d, t in R}`.
#[derive(Clone)]
pub enum ThresholdFamily {
    Model(CompositeModel),
    /// A user-supplied `c` with declared parameter dimension and degree.
    Custom {
        name: String,
        dim: usize,
        degree: usize,
        c: CustomC,
    },
}

impl fmt::Debug for ThresholdFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdFamily::Model(m) => write!(f, "ThresholdFamily({m:?})"),
            ThresholdFamily::Custom { name, dim, degree, .. } => {
                write!(f, "ThresholdFamily({name}, d={dim}, K={degree})")
            }
        }
    }
}

impl ThresholdFamily {
    pub fn dim(&self) -> usize {
        match self {
            ThresholdFamily::Model(m) => m.param_dim(),
            ThresholdFamily::Custom { dim, .. } => *dim,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            ThresholdFamily::Model(m) => m.degree(),
            ThresholdFamily::Custom { degree, .. } => *degree,
        }
    }

    pub fn c(&self, x: &[f64], xi: &SampleXi) -> f64 {
        match self {
            ThresholdFamily::Model(m) => m.value_unchecked(x, xi),
            ThresholdFamily::Custom { c, .. } => c(x, xi),
        }
    }

    fn check(&self, points: &[SampleXi]) -> Result<()> {
        if let ThresholdFamily::Model(m) = self {
            m.validate()?;
            for p in points {
                m.check_sample(p)?;
            }
        }
        if self.dim() == 0 || self.degree() == 0 {
            return Err(Error::Domain("family needs d >= 1 and K >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelingResult {
    /// Bit `i` is the label of point `i`.
    pub labels: u32,
    /// `None` when no witness was found within the budget.
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShatterCertificate {
    pub points: Vec<Vec<f64>>,
    pub labelings: Vec<LabelingResult>,
    pub shattered: bool,
    pub budget: usize,
    pub seed: u64,
    pub evaluations: usize,
}

impl ShatterCertificate {
    pub fn realized(&self) -> usize {
        self.labelings.iter().filter(|l| l.witness.is_some()).count()
    }

    /// Replays every witness against the family.
    pub fn verify(&self, family: &ThresholdFamily, points: &[SampleXi]) -> bool {
        self.labelings.iter().all(|l| match &l.witness {
            Some(w) => labeling_of(family, points, &w.x, w.t) == l.labels,
            None => true,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Bit mask of `1{c(x; xi_i) >= t}`.
pub fn labeling_of(family: &ThresholdFamily, points: &[SampleXi], x: &[f64], t: f64) -> u32 {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| family.c(x, p) >= t)
        .fold(0, |acc, (i, _)| acc | 1 << i)
}

/// Best threshold for `labels` at fixed `x`: returns `(margin, t)` where a
/// positive margin means the labeling is realized with that `t`.
fn margin(cs: &[f64], labels: u32) -> (f64, f64) {
    let mut min_pos = f64::INFINITY;
    let mut max_neg = f64::NEG_INFINITY;
    for (i, &c) in cs.iter().enumerate() {
        if labels >> i & 1 == 1 {
            min_pos = min_pos.min(c);
        } else {
            max_neg = max_neg.max(c);
        }
    }
    match (min_pos.is_finite(), max_neg.is_finite()) {
        (true, true) => (min_pos - max_neg, min_pos),
        (true, false) => (1.0, min_pos),
        (false, true) => (1.0, max_neg + 1.0 + max_neg.abs()),
        (false, false) => (1.0, 0.0),
    }
}

fn random_x(rng: &mut Rng, d: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Minimizes `f` from `x0` with the Nelder-Mead simplex method; stops early
/// once `f` drops below `stop`.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    stop: f64,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut evals = 0;
    let eval = |x: Vec<f64>, evals: &mut usize| {
        *evals += 1;
        let v = f(&x);
        (x, if v.is_nan() { f64::INFINITY } else { v })
    };
    simplex.push(eval(x0.to_vec(), &mut evals));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(eval(x, &mut evals));
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < stop {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let reflected = eval(along(1.0), &mut evals);
        if reflected.1 < simplex[0].1 {
            let expanded = eval(along(2.0), &mut evals);
            simplex[n] = if expanded.1 < reflected.1 { expanded } else { reflected };
        } else if reflected.1 < simplex[n - 1].1 {
            simplex[n] = reflected;
        } else {
            let contracted = eval(along(-0.5), &mut evals);
            if contracted.1 < simplex[n].1 {
                simplex[n] = contracted;
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&p.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    *p = eval(x, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals)
}

/// Searches for a witness `(x, t)` of every labeling of `points`.
///
/// A shared pool of `budget` random parameters is scanned first (each `x`
/// realizes the `N + 1` threshold cuts of its sorted `c` values); labelings
/// still missing are then targeted by Nelder-Mead on the margin
/// `min_{pos} c_i - max_{neg} c_i` with another `budget` evaluations each.
/// Every witness is re-verified before it is recorded.
pub fn check_shatter(
    family: &ThresholdFamily,
    points: &[SampleXi],
    budget: usize,
    seed: u64,
) -> Result<ShatterCertificate> {
    let n = points.len();
    if n > MAX_SHATTER_POINTS {
        return Err(Error::TooManyPoints {
            n,
            max: MAX_SHATTER_POINTS,
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput("no points to shatter"));
    }
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    family.check(points)?;
    let d = family.dim();

    // Phase 1: shared random pool; smallest draw index wins per labeling.
    let found: BTreeMap<u32, (usize, Witness)> = (0..budget)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<u32, (usize, Witness)>, k| {
            let mut rng = rng_from(seed, &[0, k as u64]);
            let x = random_x(&mut rng, d);
            let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (family.c(&x, p), i)).collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut labels = 0u32;
            let cut = |labels: u32, t: f64, acc: &mut BTreeMap<u32, (usize, Witness)>| {
                if acc.get(&labels).map_or(true, |(j, _)| *j > k) {
                    acc.insert(labels, (k, Witness { x: x.clone(), t }));
                }
            };
            cut(0, order[0].0 + 1.0 + order[0].0.abs(), &mut acc);
            for (pos, &(c, i)) in order.iter().enumerate() {
                labels |= 1 << i;
                if pos + 1 < n && order[pos + 1].0 == c {
                    continue;
                }
                cut(labels, c, &mut acc);
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (l, (k, w)) in b {
                if a.get(&l).map_or(true, |(j, _)| *j > k) {
                    a.insert(l, (k, w));
                }
            }
            a
        });

    // Phase 2: targeted search for the remaining labelings.
    let total = 1u64 << n;
    let results: Vec<(LabelingResult, usize)> = (0..total)
        .into_par_iter()
        .map(|labels| {
            let labels = labels as u32;
            if let Some((_, w)) = found.get(&labels) {
                if labeling_of(family, points, &w.x, w.t) == labels {
                    return (
                        LabelingResult {
                            labels,
                            witness: Some(w.clone()),
                        },
                        0,
                    );
                }
            }
            let mut rng = rng_from(seed, &[1, labels as u64]);
            let objective = |x: &[f64]| {
                let cs: Vec<f64> = points.iter().map(|p| family.c(x, p)).collect();
                let (m, _) = margin(&cs, labels);
                let scale = 1.0 + cs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
                -m / scale
            };
            let mut used = 0;
            let mut restarts = 0;
            while used < budget {
                let x0 = random_x(&mut rng, d);
                let step = 0.5 * x0.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(0.1);
                let (x, _, e) = nelder_mead(&objective, &x0, step, (budget - used).min(200 * (d + 1)), -1e-9);
                used += e;
                restarts += 1;
                let cs: Vec<f64> = points.iter().map(|p| family.c(&x, p)).collect();
                let (m, t_edge) = margin(&cs, labels);
                if m > 0.0 {
                    let t = if labels == 0 || labels == (total - 1) as u32 {
                        t_edge
                    } else {
                        t_edge - 0.5 * m
                    };
                    if labeling_of(family, points, &x, t) == labels {
                        return (
                            LabelingResult {
                                labels,
                                witness: Some(Witness { x, t }),
                            },
                            used,
                        );
                    }
                }
                if restarts > 1000 {
                    break;
                }
            }
            (LabelingResult { labels, witness: None }, used)
        })
        .collect();

    let evaluations = budget + results.iter().map(|r| r.1).sum::<usize>();
    let labelings: Vec<LabelingResult> = results.into_iter().map(|r| r.0).collect();
    let shattered = labelings.iter().all(|l| l.witness.is_some());
    Ok(ShatterCertificate {
        points: points.iter().map(SampleXi::components).collect(),
        labelings,
        shattered,
        budget,
        seed,
        evaluations,
    })
}

/// Random point configuration for a built-in family: Gaussian measurements
/// and independent standard normal responses.
pub fn random_points(model: &CompositeModel, n: usize, seed: u64) -> Vec<SampleXi> {
    (0..n as u64)
        .map(|i| {
            let mut rng = rng_from(seed, &[i]);
            let mut g = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
            let meas = g(model.measurement_len());
            let b = g(1)[0];
            match *model {
                CompositeModel::PhaseRetrieval { .. } => SampleXi::PhaseRetrieval { a: meas, b },
                CompositeModel::MatrixSensing { .. } => SampleXi::MatrixSensing { a: meas, b },
                CompositeModel::Linear { .. } => SampleXi::Linear { phi: meas, b },
                CompositeModel::BlindDeconv { d1, .. } => SampleXi::BlindDeconv {
                    u: meas[..d1].to_vec(),
                    v: meas[d1..].to_vec(),
                    b,
                },
            }
        })
        .collect()
}

/// Configurations tried per size in [`vc_lower_bound`].
pub const CONFIGS_PER_SIZE: u64 = 3;

/// Largest `N <= n_max` such that one of the seeded configurations of `N`
/// points (from `points_for(N, config_seed)`) is certified shattered. The
/// scan stops at the first size with no certified configuration.
pub fn vc_lower_bound_with(
    family: &ThresholdFamily,
    n_max: usize,
    budget: usize,
    seed: u64,
    points_for: impl Fn(usize, u64) -> Vec<SampleXi>,
) -> Result<usize> {
    if n_max > MAX_SHATTER_POINTS {
        return Err(Error::TooManyPoints {
            n: n_max,
            max: MAX_SHATTER_POINTS,
        });
    }
    let mut best = 0;
    for n in 1..=n_max {
        let mut ok = false;
        for config in 0..CONFIGS_PER_SIZE {
            let pts = points_for(n, crate::rng::derive_seed(seed, &[n as u64, config]));
            let cert = check_shatter(
                family,
                &pts,
                budget,
                crate::rng::derive_seed(seed, &[n as u64, config, 1]),
            )?;
            if cert.shattered && cert.verify(family, &pts) {
                ok = true;
                break;
            }
        }
        if !ok {
            break;
        }
        best = n;
    }
    Ok(best)
}

/// [`vc_lower_bound_with`] using [`random_points`] for built-in models.
pub fn vc_lower_bound(family: &ThresholdFamily, n_max: usize, budget: usize, seed: u64) -> Result<usize> {
    let model = match family {
        ThresholdFamily::Model(m) => *m,
        ThresholdFamily::Custom { .. } => {
            return Err(Error::Domain(
                "custom families need vc_lower_bound_with and a point sampler".into(),
            ))
        }
    };
    vc_lower_bound_with(family, n_max, budget, seed, |n, s| random_points(&model, n, s))
}

/// Smallest `N > d` with `(50 K N / (d + 1))^(d + 1) < 2^N`; no set of `N`
/// points can be shattered, so `vc < N`.
pub fn vc_upper_bound_poly(d: usize, k: usize) -> Result<usize> {
    if d == 0 || k == 0 {
        return Err(Error::Domain("d and K must be at least 1".into()));
    }
    let dp = (d + 1) as f64;
    let holds = |n: usize| dp * (50.0 * k as f64 * n as f64 / dp).ln() < n as f64 * std::f64::consts::LN_2;
    let mut n = d + 1;
    while !holds(n) {
        n += 1;
    }
    Ok(n)
}

/// `d ln(K d)`, the nominal growth of the VC dimension without its constant.
pub fn vc_nominal(d: usize, k: usize) -> f64 {
    d as f64 * (k as f64 * d as f64).ln()
}

/// `Delta = sqrt((d + vc ln m + ln(1/delta)) / m)`.
pub fn delta_rate(d: usize, vc: f64, m: usize, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta {delta} not in (0, 1)")));
    }
    if !(vc >= 0.0) {
        return Err(Error::Domain(format!("vc {vc} must be nonnegative")));
    }
    let m = m as f64;
    Ok(((d as f64 + vc * m.ln() + (1.0 / delta).ln()) / m).sqrt())
}

/// The bound `(50 K N / d)^d` on the number of sign patterns.
pub fn sign_pattern_bound(d: usize, k: usize, n: usize) -> f64 {
    (50.0 * k as f64 * n as f64 / d as f64).powi(d as i32)
}

pub type Poly = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct SignPatternCount {
    pub count: usize,
    pub bound: f64,
    pub patterns: BTreeSet<Vec<i8>>,
}

impl SignPatternCount {
    pub fn within_bound(&self) -> bool {
        (self.count as f64) <= self.bound
    }
}

fn sign_vector(polys: &[Poly], x: &[f64]) -> Vec<i8> {
    let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    polys
        .iter()
        .map(|p| {
            let v = p(x);
            if v.abs() <= ZERO_TOL * scale * scale {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Values within this (scale-adjusted) tolerance count as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Lower bound on the number of sign patterns of `polys` over `R^d` from
/// `budget` seeded points: half random draws at random scales, a quarter on
/// a uniform grid, and a quarter on zeros of single polynomials found by
/// bisection along random lines.
pub fn count_sign_patterns(
    polys: &[Poly],
    d: usize,
    degree: usize,
    budget: usize,
    seed: u64,
) -> Result<SignPatternCount> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if polys.is_empty() {
        return Err(Error::EmptyInput("no polynomials"));
    }
    if d == 0 || degree == 0 {
        return Err(Error::Domain("d and K must be at least 1".into()));
    }
    let n_random = budget.div_ceil(2);
    let n_grid = budget / 4;
    let n_roots = budget - n_random - n_grid;
    let mut points: Vec<Vec<f64>> = (0..n_random as u64)
        .into_par_iter()
        .map(|i| random_x(&mut rng_from(seed, &[0, i]), d))
        .collect();
    let per_axis = ((n_grid as f64).powf(1.0 / d as f64).floor() as usize).max(if n_grid > 0 { 1 } else { 0 });
    if per_axis > 0 {
        let total = per_axis.pow(d as u32);
        for idx in 0..total {
            let mut rest = idx;
            let x = (0..d)
                .map(|_| {
                    let k = rest % per_axis;
                    rest /= per_axis;
                    if per_axis == 1 {
                        0.0
                    } else {
                        -3.0 + 6.0 * k as f64 / (per_axis - 1) as f64
                    }
                })
                .collect();
            points.push(x);
        }
    }
    let roots: Vec<Option<Vec<f64>>> = (0..n_roots as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(seed, &[2, i]);
            let which = rng.gen_range(0..polys.len());
            let x0 = random_x(&mut rng, d);
            let v = random_x(&mut rng, d);
            let p = &polys[which];
            let at = |t: f64| -> Vec<f64> { x0.iter().zip(&v).map(|(a, b)| a + t * b).collect() };
            let mut lo = 0.0;
            let f_lo = p(&at(lo));
            let mut hi = None;
            for step in 1..=40 {
                let t = 0.25 * step as f64 * if step % 2 == 0 { 1.0 } else { -1.0 };
                if p(&at(t)).signum() != f_lo.signum() {
                    hi = Some(t);
                    break;
                }
            }
            let mut hi = hi?;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if p(&at(mid)).signum() == f_lo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let a = at(lo);
            let b = at(hi);
            Some(if p(&a).abs() <= p(&b).abs() { a } else { b })
        })
        .collect();
    points.extend(roots.into_iter().flatten());
    let patterns: BTreeSet<Vec<i8>> = points
        .par_iter()
        .map(|x| sign_vector(polys, x))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Ok(SignPatternCount {
        count: patterns.len(),
        bound: sign_pattern_bound(d, degree, polys.len()),
        patterns,
    })
}

/// The polynomials `x -> c(x; xi_i) - t` on `R^{d+1}` (last coordinate `t`)
/// whose sign patterns control the threshold class.
pub fn threshold_polys(model: &CompositeModel, points: &[SampleXi]) -> Vec<Poly> {
    let d = model.param_dim();
    points
        .iter()
        .map(|p| {
            let (model, p) = (*model, p.clone());
            Arc::new(move |z: &[f64]| model.value_unchecked(&z[..d], &p) - z[d]) as Poly
        })
        .collect()
}

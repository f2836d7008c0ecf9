use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{EmpiricalObjective, PopulationOracle};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, norm};
use crate::rng::rng_from;
use crate::set_calculus::{hausdorff, ConvexBody};

/// Number of best probes refined per prefix.
pub const REFINE_TOP: usize = 10;
/// Coordinate steps per refinement.
pub const REFINE_STEPS: usize = 100;

/// What the population side of `gap_hausdorff` was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HausdorffBasis {
    /// Both subdifferentials known exactly (finite oracle distribution).
    Exact,
    /// Population subdifferential approximated by the singleton `{G(x)}`.
    SingletonApprox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRecord {
    pub x: Vec<f64>,
    /// `||G_S(x) - G(x)||`
    pub gap_selection: f64,
    /// Hausdorff distance between the empirical and population subdifferentials.
    pub gap_hausdorff: f64,
    pub basis: HausdorffBasis,
    pub oracle_err: f64,
}

pub fn pointwise_gap(obj: &EmpiricalObjective, oracle: &PopulationOracle, x: &[f64]) -> Result<GapRecord> {
    check_dim(obj.dim(), x.len())?;
    let gs = obj.g_s_unchecked(x);
    let (g, oracle_err) = oracle.evaluate(x)?;
    let z = obj.empirical_subdiff(x)?;
    let (pop, basis) = match oracle.subdiff(x) {
        Some(set) => (set?, HausdorffBasis::Exact),
        None => (ConvexBody::point(g.clone())?, HausdorffBasis::SingletonApprox),
    };
    Ok(GapRecord {
        x: x.to_vec(),
        gap_selection: dist(&gs, &g),
        gap_hausdorff: hausdorff(&z, &pop)?,
        basis,
        oracle_err,
    })
}

/// Writes records as CSV with columns
/// `x0..x{d-1},gap_selection,gap_hausdorff,oracle_err,seed,m,d`.
pub fn write_gap_csv<W: Write>(records: &[GapRecord], seed: u64, m: usize, mut w: W) -> Result<()> {
    let d = records.first().map_or(0, |r| r.x.len());
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend(["gap_selection", "gap_hausdorff", "oracle_err", "seed", "m", "d"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for r in records {
        check_dim(d, r.x.len())?;
        let mut row: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        row.push(r.gap_selection.to_string());
        row.push(r.gap_hausdorff.to_string());
        row.push(r.oracle_err.to_string());
        row.push(seed.to_string());
        row.push(m.to_string());
        row.push(d.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupGap {
    /// Largest selection gap found; a lower bound on the supremum.
    pub value: f64,
    pub argmax: Vec<f64>,
    pub oracle_err: f64,
    pub evaluations: usize,
}

fn selection_gap(obj: &EmpiricalObjective, oracle: &PopulationOracle, x: &[f64]) -> Result<f64> {
    let gs = obj.g_s_unchecked(x);
    let (g, _) = oracle.evaluate(x)?;
    Ok(dist(&gs, &g))
}

fn ball_probe(x0: &[f64], r: f64, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[index]);
    let d = x0.len();
    let mut u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = norm(&u);
    let radius = r * rng.gen::<f64>().powf(1.0 / d as f64);
    if n > 0.0 {
        u.iter_mut().for_each(|v| *v *= radius / n);
    }
    u.iter().zip(x0).map(|(a, b)| a + b).collect()
}

fn clamp_to_ball(x: &mut [f64], x0: &[f64], r: f64) {
    let off: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let n = norm(&off);
    if n > r {
        for ((xi, oi), ci) in x.iter_mut().zip(&off).zip(x0) {
            *xi = ci + oi * (r / n);
        }
    }
}

/// Coordinate hill-climb: each step tries `+-step` along one coordinate and
/// keeps the better point; the step halves after a full unsuccessful sweep.
fn refine(
    obj: &EmpiricalObjective,
    oracle: &PopulationOracle,
    start: Vec<f64>,
    value: f64,
    x0: &[f64],
    r: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let d = start.len();
    let (mut best, mut x) = (value, start);
    let mut step = 0.1 * r;
    let mut evals = 0;
    let mut since_improve = 0;
    for k in 0..REFINE_STEPS {
        let j = k % d;
        let mut improved = false;
        for sign in [1.0, -1.0] {
            let mut y = x.clone();
            y[j] += sign * step;
            clamp_to_ball(&mut y, x0, r);
            let v = selection_gap(obj, oracle, &y)?;
            evals += 1;
            if v > best {
                best = v;
                x = y;
                improved = true;
                break;
            }
        }
        since_improve = if improved { 0 } else { since_improve + 1 };
        if since_improve >= d {
            step *= 0.5;
            since_improve = 0;
        }
    }
    Ok((best, x, evals))
}

/// Lower bound on `sup_{||x - x0|| <= r} ||G(x) - G_S(x)||`.
///
/// Probe `i` is a uniform point of the ball depending only on `(seed, i)`.
/// For every prefix size `budget, budget/2, budget/4, ..., 1` the best
/// [`REFINE_TOP`] probes of that prefix are refined by a coordinate
/// hill-climb. Because the prefixes for `budget` are a subset of those for
/// `2 budget`, the reported value never decreases when the budget doubles.
pub fn sup_gap_over_ball(
    obj: &EmpiricalObjective,
    oracle: &PopulationOracle,
    x0: &[f64],
    r: f64,
    budget: usize,
    seed: u64,
) -> Result<SupGap> {
    check_dim(obj.dim(), x0.len())?;
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius {r} must be positive")));
    }
    let probes: Vec<(Vec<f64>, f64)> = (0..budget as u64)
        .into_par_iter()
        .map(|i| {
            let x = ball_probe(x0, r, seed, i);
            let v = selection_gap(obj, oracle, &x)?;
            Ok((x, v))
        })
        .collect::<Result<_>>()?;

    let mut chosen = BTreeSet::new();
    let mut prefix = budget;
    while prefix >= 1 {
        let mut idx: Vec<usize> = (0..prefix).collect();
        idx.sort_by(|&a, &b| probes[b].1.total_cmp(&probes[a].1).then(a.cmp(&b)));
        chosen.extend(idx.into_iter().take(REFINE_TOP));
        prefix /= 2;
    }
    let chosen: Vec<usize> = chosen.into_iter().collect();
    let refined: Vec<(f64, Vec<f64>, usize)> = chosen
        .par_iter()
        .map(|&i| refine(obj, oracle, probes[i].0.clone(), probes[i].1, x0, r))
        .collect::<Result<_>>()?;

    let mut best_value = f64::NEG_INFINITY;
    let mut best_x = x0.to_vec();
    for (x, v) in &probes {
        if *v > best_value {
            best_value = *v;
            best_x = x.clone();
        }
    }
    let mut evaluations = budget;
    for (v, x, e) in refined {
        evaluations += e;
        if v > best_value {
            best_value = v;
            best_x = x;
        }
    }
    let (_, oracle_err) = oracle.evaluate(&best_x)?;
    Ok(SupGap {
        value: best_value,
        argmax: best_x,
        oracle_err,
        evaluations,
    })
}

//! Stationary points of the noiseless phase-retrieval objective
//! `Phi_S(x) = (1/m) sum_i |(a_i^T x)^2 - b_i|` and their distance to the
//! population stationary set `{0} u {+-xbar} u {x perp xbar : ||x|| = c ||xbar||}`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dist, dot, norm};
use crate::models::{CompositeModel, SampleXi};
use crate::set_calculus::project;
use crate::subgradient_maps::{ordered_sum, EmpiricalObjective};

fn c_map(c: f64) -> f64 {
    c / (1.0 + c * c) + c.atan()
}

/// `|c/(1+c^2) + atan(c) - pi/4|`.
pub fn c_constant_residual(c: f64) -> f64 {
    (c_map(c) - std::f64::consts::FRAC_PI_4).abs()
}

/// Root of `c/(1+c^2) + atan(c) = pi/4` by bisection; the map is strictly
/// increasing on `(0, inf)` with derivative `2/(1+c^2)^2`.
pub fn solve_c_constant() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if c_map(mid) < std::f64::consts::FRAC_PI_4 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if c_constant_residual(lo) <= c_constant_residual(hi) {
        lo
    } else {
        hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationStationarySet {
    xbar: Vec<f64>,
    c: f64,
    rho: f64,
}

impl PopulationStationarySet {
    pub fn new(xbar: &[f64]) -> Result<Self> {
        let n = norm(xbar);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("xbar must be nonzero and finite".into()));
        }
        let c = solve_c_constant();
        Ok(PopulationStationarySet {
            xbar: xbar.to_vec(),
            c,
            rho: c * n,
        })
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Ring radius `c ||xbar||`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dist(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.xbar.len(), x.len())?;
        let n = norm(&self.xbar);
        let alpha = dot(x, &self.xbar) / n;
        let perp2 = (dot(x, x) - alpha * alpha).max(0.0);
        let ring = alpha.hypot(perp2.sqrt() - self.rho);
        let plus = dist(x, &self.xbar);
        let minus = x
            .iter()
            .zip(&self.xbar)
            .map(|(a, b)| (a + b) * (a + b))
            .sum::<f64>()
            .sqrt();
        Ok(norm(x).min(plus).min(minus).min(ring))
    }
}

pub fn dist_to_population_z(x: &[f64], xbar: &[f64]) -> Result<f64> {
    PopulationStationarySet::new(xbar)?.dist(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    /// Initial subgradient step relative to `||xbar||`.
    pub gamma0_rel: f64,
    pub descent_iters: usize,
    pub polish_iters: usize,
    /// Radius of the enlarged subdifferential relative to `||xbar||`.
    pub radius_rel: f64,
    /// Levenberg-Marquardt iterations of the stationarity solve.
    pub newton_iters: usize,
    /// Acceptance tolerance; defaults to `1e-3 ||xbar|| mean ||a_i||^2`.
    pub tol: Option<f64>,
    /// Terminals closer than this (relative to `||xbar||`) are merged.
    pub cluster_rel: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            gamma0_rel: 0.1,
            descent_iters: 10_000,
            polish_iters: 200,
            radius_rel: 1e-2,
            newton_iters: 200,
            tol: None,
            cluster_rel: 1e-2,
        }
    }
}

impl LandscapeConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive, got {v}")))
            }
        };
        pos(self.gamma0_rel, "gamma0_rel")?;
        pos(self.radius_rel, "radius_rel")?;
        pos(self.cluster_rel, "cluster_rel")?;
        if let Some(t) = self.tol {
            pos(t, "tol")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Subgradient descent with decaying steps, then best-iterate polishing.
    Descent,
    /// Levenberg-Marquardt on the enlarged stationarity condition; reaches
    /// saddles as well as minima.
    Stationarity,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Descent => "descent",
            Route::Stationarity => "stationarity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPointReport {
    pub start_index: usize,
    pub route: Route,
    pub x: Vec<f64>,
    /// `dist(0, enlarged subdifferential at x)`, an upper bound from projection.
    pub residual: f64,
    pub iterations: usize,
    pub dist_to_z: f64,
    pub accepted: bool,
}

fn tolerance(obj: &EmpiricalObjective, xbar_norm: f64, cfg: &LandscapeConfig) -> f64 {
    cfg.tol.unwrap_or_else(|| {
        let mean_sq = obj.data().iter().map(|xi| match xi {
            SampleXi::PhaseRetrieval { a, .. } => dot(a, a),
            _ => 0.0,
        });
        1e-3 * xbar_norm * mean_sq.sum::<f64>() / obj.m() as f64
    })
}

/// `(Phi_S(x), G_S(x))` in one pass.
fn value_and_g(obj: &EmpiricalObjective, x: &[f64]) -> (f64, Vec<f64>) {
    let d = obj.dim();
    let mut s = ordered_sum(obj.m(), d + 1, d, |i, acc, grad| {
        let c = obj.model().value_grad_unchecked(x, &obj.data()[i], grad);
        acc[d] += obj.loss().eval(c);
        let g = obj.loss().selection_g(c);
        if g != 0.0 {
            acc[..d].iter_mut().zip(grad.iter()).for_each(|(a, v)| *a += g * v);
        }
    });
    let m = obj.m() as f64;
    s.iter_mut().for_each(|v| *v /= m);
    let value = s.pop().unwrap_or(0.0);
    (value, s)
}

/// Element of the enlarged subdifferential: samples within `radius ||grad c_i||`
/// of a kink get the interpolated slope `mid + half * clip(offset / (radius ||grad c_i||))`.
fn smoothed_field(obj: &EmpiricalObjective, x: &[f64], radius: f64) -> Vec<f64> {
    let d = obj.dim();
    let mut s = ordered_sum(obj.m(), d, d, |i, acc, grad| {
        let c = obj.model().value_grad_unchecked(x, &obj.data()[i], grad);
        let gn = norm(grad);
        let w = radius * gn;
        let g = match obj.loss().near_kink(c, w) {
            Some(k) => {
                let (lo, hi) = obj.loss().one_sided_derivatives(k.location);
                let t = if w > 0.0 {
                    ((c - k.location) / w).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                0.5 * (lo + hi) + 0.5 * (hi - lo) * t
            }
            None => obj.loss().selection_g(c),
        };
        if g != 0.0 {
            acc.iter_mut().zip(grad.iter()).for_each(|(a, v)| *a += g * v);
        }
    });
    let m = obj.m() as f64;
    s.iter_mut().for_each(|v| *v /= m);
    s
}

fn residual(obj: &EmpiricalObjective, x: &[f64], radius: f64) -> Result<f64> {
    let body = obj.eps_subdiff(x, radius)?;
    Ok(project(&vec![0.0; x.len()], &body)?.distance)
}

fn descend(obj: &EmpiricalObjective, start: &[f64], xbar_norm: f64, cfg: &LandscapeConfig) -> (Vec<f64>, usize) {
    let gamma0 = cfg.gamma0_rel * xbar_norm;
    let mut x = start.to_vec();
    let (mut v, mut g) = value_and_g(obj, &x);
    let (mut best, mut best_v, mut best_g) = (x.clone(), v, g.clone());
    let mut iters = 0;
    for k in 1..=cfg.descent_iters {
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        axpy(-gamma0 / (k as f64).sqrt() / gn, &g, &mut x);
        (v, g) = value_and_g(obj, &x);
        iters += 1;
        if v < best_v {
            (best, best_v, best_g) = (x.clone(), v, g.clone());
        }
    }
    let mut step = gamma0 / (cfg.descent_iters.max(1) as f64).sqrt();
    for _ in 0..cfg.polish_iters {
        let gn = norm(&best_g);
        if gn == 0.0 || step < 1e-14 * xbar_norm {
            break;
        }
        let mut trial = best.clone();
        axpy(-step / gn, &best_g, &mut trial);
        let (tv, tg) = value_and_g(obj, &trial);
        iters += 1;
        if tv < best_v {
            (best, best_v, best_g) = (trial, tv, tg);
        } else {
            step *= 0.5;
        }
    }
    (best, iters)
}

fn stationarity_solve(
    obj: &EmpiricalObjective,
    start: &[f64],
    radius: f64,
    target: f64,
    iters: usize,
) -> (Vec<f64>, usize) {
    let d = start.len();
    let mut x = start.to_vec();
    let mut f = smoothed_field(obj, &x, radius);
    let mut fn2 = dot(&f, &f);
    let mut lambda = 1e-3;
    let mut used = 0;
    while used < iters && fn2.sqrt() > target {
        used += 1;
        let h = 1e-7 * norm(&x).max(1.0);
        let mut jac = vec![0.0; d * d];
        for j in 0..d {
            let mut xp = x.clone();
            xp[j] += h;
            let fp = smoothed_field(obj, &xp, radius);
            for i in 0..d {
                jac[i * d + j] = (fp[i] - f[i]) / h;
            }
        }
        let mut jtj = vec![0.0; d * d];
        let mut jtf = vec![0.0; d];
        for a in 0..d {
            for i in 0..d {
                jtf[a] -= jac[i * d + a] * f[i];
                for b in 0..d {
                    jtj[a * d + b] += jac[i * d + a] * jac[i * d + b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut sys = jtj.clone();
            for a in 0..d {
                sys[a * d + a] += lambda * (jtj[a * d + a] + 1e-12);
            }
            let Some(delta) = crate::linalg::solve(sys, jtf.clone()) else {
                lambda *= 4.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let ft = smoothed_field(obj, &trial, radius);
            let ft2 = dot(&ft, &ft);
            if ft2 < fn2 {
                (x, f, fn2) = (trial, ft, ft2);
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (x, used)
}

/// Runs both routes from every start. Reports are ordered by start index,
/// descent before stationarity; a terminal is accepted only when its
/// residual is at most the tolerance.
pub fn find_stationary_points(
    obj: &EmpiricalObjective,
    xbar: &[f64],
    starts: &[Vec<f64>],
    cfg: &LandscapeConfig,
) -> Result<Vec<StationaryPointReport>> {
    if !matches!(obj.model(), CompositeModel::PhaseRetrieval { .. }) {
        return Err(Error::Domain(
            "landscape analysis is defined for phase retrieval".into(),
        ));
    }
    if starts.is_empty() {
        return Err(Error::EmptyInput("no starts"));
    }
    cfg.validate()?;
    let z = PopulationStationarySet::new(xbar)?;
    check_dim(obj.dim(), xbar.len())?;
    for s in starts {
        check_dim(obj.dim(), s.len())?;
    }
    let xn = norm(xbar);
    let tol = tolerance(obj, xn, cfg);
    let radius = cfg.radius_rel * xn;
    let nested: Vec<Result<Vec<StationaryPointReport>>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (xd, it_d) = descend(obj, s, xn, cfg);
            let (xs, it_s) = stationarity_solve(obj, s, radius, 1e-3 * tol, cfg.newton_iters);
            [(Route::Descent, xd, it_d), (Route::Stationarity, xs, it_s)]
                .into_iter()
                .map(|(route, x, iterations)| {
                    let res = residual(obj, &x, radius)?;
                    Ok(StationaryPointReport {
                        start_index: i,
                        route,
                        dist_to_z: z.dist(&x)?,
                        accepted: res <= tol,
                        residual: res,
                        iterations,
                        x,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(2 * starts.len());
    for r in nested {
        out.extend(r?);
    }
    Ok(out)
}

/// Greedy merge in order: a point joins the first representative within `radius`.
pub fn cluster_terminals(points: &[Vec<f64>], radius: f64) -> Vec<Vec<f64>> {
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !reps.iter().any(|r| dist(r, p) <= radius) {
            reps.push(p.clone());
        }
    }
    reps
}

/// `max_{x in Z_S} dist(x, Z)` over the clustered accepted terminals.
pub fn deviation_zs_to_z(reports: &[StationaryPointReport], xbar: &[f64], cluster_rel: f64) -> Result<f64> {
    let accepted: Vec<Vec<f64>> = reports.iter().filter(|r| r.accepted).map(|r| r.x.clone()).collect();
    if accepted.is_empty() {
        return Err(Error::EmptyInput("no accepted stationary points"));
    }
    let z = PopulationStationarySet::new(xbar)?;
    let mut worst = 0.0f64;
    for p in cluster_terminals(&accepted, cluster_rel * norm(xbar)) {
        worst = worst.max(z.dist(&p)?);
    }
    Ok(worst)
}

/// CSV with header `start,route,x0..,residual,iterations,dist_to_z,accepted,seed`.
pub fn write_reports_csv(reports: &[StationaryPointReport], seed: u64, mut w: impl Write) -> Result<()> {
    let d = reports.first().map_or(0, |r| r.x.len());
    let mut header = vec!["start".to_string(), "route".to_string()];
    header.extend((0..d).map(|j| format!("x{j}")));
    header.extend(["residual", "iterations", "dist_to_z", "accepted", "seed"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for r in reports {
        let xs: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.start_index,
            r.route.name(),
            xs.join(","),
            r.residual,
            r.iterations,
            r.dist_to_z,
            r.accepted,
            seed
        )?;
    }
    Ok(())
}

//! Self-contained invariant suite behind the `verify` experiment.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::analytic_1d::{d1_metric, d2_graph_metric, selection_sup_diff, PiecewiseLinearConvexFn, SelectionRule};
use crate::error::Result;
use crate::models::{CompositeModel, SampleXi};
use crate::rng::{rng_from, Rng};
use crate::scalar_loss;
use crate::set_calculus::{convex_hull, deviation, hausdorff, minkowski_sum, ConvexBody};
use crate::vc_toolkit;

pub type HausdorffFn = Arc<dyn Fn(&ConvexBody, &ConvexBody) -> Result<f64> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub module: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Runs the suite with the library Hausdorff distance.
pub fn run_verify(seed: u64) -> VerifyReport {
    run_verify_with(seed, Arc::new(|a: &ConvexBody, b: &ConvexBody| hausdorff(a, b)))
}

/// The `hausdorff` hook replaces the set distance used by the set-calculus
/// and nonsmooth-example checks.
pub fn run_verify_with(seed: u64, hausdorff: HausdorffFn) -> VerifyReport {
    let checks: Vec<(&str, &str, fn(u64, &HausdorffFn) -> std::result::Result<String, String>)> = vec![
        ("analytic_1d", "scaled_abs_at_origin", scaled_abs_at_origin),
        ("analytic_1d", "two_kink_sweep", two_kink_sweep),
        ("analytic_1d", "graphical_below_pointwise", graphical_below_pointwise),
        ("analytic_1d", "selection_bound", selection_bound),
        ("set_calculus", "hausdorff_symmetry", hausdorff_symmetry),
        ("set_calculus", "hausdorff_triangle", hausdorff_triangle),
        ("set_calculus", "hausdorff_dominates_deviation", dominates_deviation),
        ("set_calculus", "hull_contraction", hull_contraction),
        ("set_calculus", "minkowski_contraction", minkowski_contraction),
        ("scalar_loss", "decomposition", loss_decomposition),
        ("vc_toolkit", "delta_rate", vc_delta_rate),
        ("vc_toolkit", "upper_bound_scan", vc_scan),
        ("vc_toolkit", "sign_pattern_bound", vc_sign_patterns),
        ("vc_toolkit", "certificates_verify", vc_certificates),
    ];
    let checks = checks
        .into_iter()
        .map(|(module, check, f)| {
            let (passed, detail) = match f(seed, &hausdorff) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                module: module.into(),
                check: check.into(),
                passed,
                detail,
            }
        })
        .collect();
    VerifyReport { seed, checks }
}

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

fn random_plc(rng: &mut Rng) -> PiecewiseLinearConvexFn {
    let n = rng.gen_range(0..5);
    let mut bps: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut slopes = vec![rng.gen_range(-2.0..2.0)];
    for _ in 0..bps.len() {
        let last = slopes[slopes.len() - 1];
        slopes.push(last + rng.gen_range(0.0..1.5));
    }
    PiecewiseLinearConvexFn::new(bps, slopes, rng.gen_range(-1.0..1.0)).expect("valid random function")
}

fn gaussian(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_body(rng: &mut Rng) -> ConvexBody {
    let d = rng.gen_range(1..=3);
    random_body_in(rng, d)
}

fn random_body_in(rng: &mut Rng, d: usize) -> ConvexBody {
    let center = gaussian(rng, d);
    if rng.gen::<bool>() {
        let gens = (0..rng.gen_range(1..=4)).map(|_| gaussian(rng, d)).collect();
        ConvexBody::zonotope(center, gens).expect("valid zonotope")
    } else {
        let pts = (0..rng.gen_range(1..=6))
            .map(|_| gaussian(rng, d).iter().zip(&center).map(|(a, b)| a + b).collect())
            .collect();
        ConvexBody::vpolytope(pts).expect("valid polytope")
    }
}

fn scaled_abs_at_origin(_: u64, h: &HausdorffFn) -> Check {
    let f = PiecewiseLinearConvexFn::abs();
    let g = PiecewiseLinearConvexFn::scaled_abs(2.0, 0.0).map_err(err)?;
    let gap = h(&f.exact_subdiff(0.0), &g.exact_subdiff(0.0)).map_err(err)?;
    ensure((gap - 1.0).abs() <= 1e-12, || format!("H at 0 is {gap}, expected 1"))?;
    let zero = SelectionRule::Custom(Arc::new(|_, _, lo, hi| 0f64.clamp(lo, hi)));
    let at_zero = crate::analytic_1d::selection_diff_on_points(&f, &g, &[0.0], &zero).map_err(err)?;
    ensure(at_zero == 0.0, || format!("zero selections differ by {at_zero} at 0"))?;
    let open = selection_sup_diff(&f, &g, (-0.5, 0.5), &SelectionRule::RightDerivative).map_err(err)?;
    ensure(gap <= open + 1e-12, || {
        format!("H {gap} exceeds selection gap {open} on (-1/2, 1/2)")
    })?;
    Ok(format!("H = {gap}, zero-selection gap at 0 = {at_zero}"))
}

fn two_kink_sweep(_: u64, _: &HausdorffFn) -> Check {
    let f1 = PiecewiseLinearConvexFn::abs();
    for n in 1..=100 {
        let f2 = PiecewiseLinearConvexFn::two_kink(n as f64).map_err(err)?;
        let d1 = d1_metric(&f1, &f2, (-2.0, 2.0)).map_err(err)?;
        let d2 = d2_graph_metric(&f1, &f2, (-2.0, 2.0)).map_err(err)?;
        ensure(
            (d1 - 1.0).abs() <= 1e-12 && (d2 - 1.0 / n as f64).abs() <= 1e-12,
            || format!("n = {n}: d1 = {d1}, d2 = {d2}"),
        )?;
    }
    Ok("n = 1..100".into())
}

fn graphical_below_pointwise(seed: u64, _: &HausdorffFn) -> Check {
    let mut rng = rng_from(seed, &[1]);
    for pair in 0..200 {
        let (f1, f2) = (random_plc(&mut rng), random_plc(&mut rng));
        let d1 = d1_metric(&f1, &f2, (-1.0, 1.0)).map_err(err)?;
        let d2 = d2_graph_metric(&f1, &f2, (-1.0, 1.0)).map_err(err)?;
        ensure(d2 <= d1 + 1e-12, || format!("pair {pair}: d2 {d2} > d1 {d1}"))?;
    }
    Ok("200 pairs".into())
}

fn selection_bound(seed: u64, h: &HausdorffFn) -> Check {
    let mut rng = rng_from(seed, &[2]);
    for pair in 0..200u64 {
        let (f1, f2) = (random_plc(&mut rng), random_plc(&mut rng));
        let mut points: Vec<f64> = f1.breakpoints().iter().chain(f2.breakpoints()).copied().collect();
        points.extend((0..=20).map(|k| -0.99 + 0.099 * k as f64));
        let mut sup_h = 0.0f64;
        for &x in &points {
            sup_h = sup_h.max(h(&f1.exact_subdiff(x), &f2.exact_subdiff(x)).map_err(err)?);
        }
        let rule_seed = crate::rng::derive_seed(seed, &[pair]);
        let rule = SelectionRule::Custom(Arc::new(move |which, x, lo, hi| {
            let mut r = rng_from(rule_seed, &[which as u64, x.to_bits()]);
            lo + r.gen::<f64>() * (hi - lo)
        }));
        for rule in [SelectionRule::RightDerivative, rule] {
            let s = selection_sup_diff(&f1, &f2, (-1.0, 1.0), &rule).map_err(err)?;
            ensure(sup_h <= s + 1e-12, || {
                format!("pair {pair}: sup H {sup_h} > selection gap {s}")
            })?;
        }
    }
    Ok("200 pairs, two selections each".into())
}

fn hausdorff_symmetry(seed: u64, h: &HausdorffFn) -> Check {
    let mut rng = rng_from(seed, &[3]);
    for i in 0..100 {
        let a = random_body(&mut rng);
        let b = random_body_in(&mut rng, a.dim());
        let (ab, ba) = (h(&a, &b).map_err(err)?, h(&b, &a).map_err(err)?);
        ensure((ab - ba).abs() <= 1e-9 * (1.0 + ab), || {
            format!("instance {i}: H(A,B) = {ab}, H(B,A) = {ba}")
        })?;
        let aa = h(&a, &a).map_err(err)?;
        ensure(aa <= 1e-9, || format!("instance {i}: H(A,A) = {aa}"))?;
    }
    Ok("100 pairs".into())
}

fn hausdorff_triangle(seed: u64, h: &HausdorffFn) -> Check {
    let mut rng = rng_from(seed, &[4]);
    for i in 0..100 {
        let a = random_body(&mut rng);
        let b = random_body_in(&mut rng, a.dim());
        let c = random_body_in(&mut rng, a.dim());
        let (ac, ab, bc) = (
            h(&a, &c).map_err(err)?,
            h(&a, &b).map_err(err)?,
            h(&b, &c).map_err(err)?,
        );
        ensure(ac <= ab + bc + 1e-9, || format!("instance {i}: {ac} > {ab} + {bc}"))?;
    }
    Ok("100 triples".into())
}

fn dominates_deviation(seed: u64, h: &HausdorffFn) -> Check {
    let mut rng = rng_from(seed, &[5]);
    for i in 0..100 {
        let a = random_body(&mut rng);
        let b = random_body_in(&mut rng, a.dim());
        let hab = h(&a, &b).map_err(err)?;
        let (dab, dba) = (
            deviation(&a, &b).map_err(err)?.value,
            deviation(&b, &a).map_err(err)?.value,
        );
        ensure((hab - dab.max(dba)).abs() <= 1e-9 * (1.0 + hab), || {
            format!("instance {i}: H = {hab}, deviations {dab}, {dba}")
        })?;
    }
    Ok("100 pairs".into())
}

fn hull_contraction(seed: u64, h: &HausdorffFn) -> Check {
    let mut rng = rng_from(seed, &[6]);
    for i in 0..100 {
        let d = rng.gen_range(1..=3);
        let a: Vec<Vec<f64>> = (0..rng.gen_range(1..8)).map(|_| gaussian(&mut rng, d)).collect();
        let b: Vec<Vec<f64>> = (0..rng.gen_range(1..8)).map(|_| gaussian(&mut rng, d)).collect();
        let finite = |p: &[Vec<f64>], q: &[Vec<f64>]| {
            p.iter()
                .map(|x| {
                    q.iter()
                        .map(|y| crate::linalg::dist(x, y))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        let rhs = finite(&a, &b).max(finite(&b, &a));
        let lhs = h(&convex_hull(&a).map_err(err)?, &convex_hull(&b).map_err(err)?).map_err(err)?;
        ensure(lhs <= rhs + 1e-9, || format!("instance {i}: {lhs} > {rhs}"))?;
    }
    Ok("100 point sets".into())
}

fn minkowski_contraction(seed: u64, h: &HausdorffFn) -> Check {
    let mut rng = rng_from(seed, &[7]);
    for i in 0..100 {
        let a1 = random_body(&mut rng);
        let a2 = random_body_in(&mut rng, a1.dim());
        let a3 = random_body_in(&mut rng, a1.dim());
        let lhs = h(
            &minkowski_sum(&a1, &a3).map_err(err)?,
            &minkowski_sum(&a2, &a3).map_err(err)?,
        )
        .map_err(err)?;
        let rhs = h(&a1, &a2).map_err(err)?;
        ensure(lhs <= rhs + 1e-9, || format!("instance {i}: {lhs} > {rhs}"))?;
    }
    Ok("100 triples".into())
}

fn loss_decomposition(_: u64, _: &HausdorffFn) -> Check {
    let grid: Vec<f64> = (0..=400).map(|k| -4.0 + 0.02 * k as f64).collect();
    for name in ["abs", "hinge", "square", "pinball(0.3)"] {
        let loss = scalar_loss::builtin(name).map_err(err)?;
        let report = loss.decompose_check(&grid).map_err(err)?;
        ensure(report.ok(), || format!("{name}: {report:?}"))?;
    }
    Ok("abs, hinge, square, pinball(0.3)".into())
}

fn vc_delta_rate(_: u64, _: &HausdorffFn) -> Check {
    let v = vc_toolkit::delta_rate(1, 0.0, 1, (-1f64).exp()).map_err(err)?;
    ensure((v - 2f64.sqrt()).abs() <= 1e-15, || {
        format!("delta_rate = {v}, expected sqrt 2")
    })?;
    Ok(format!("{v}"))
}

fn vc_scan(_: u64, _: &HausdorffFn) -> Check {
    for d in 1..=4usize {
        for k in 1..=3usize {
            let n = vc_toolkit::vc_upper_bound_poly(d, k).map_err(err)?;
            let holds = |n: usize| {
                let dp = (d + 1) as f64;
                dp * (50.0 * k as f64 * n as f64 / dp).log2() < n as f64
            };
            ensure(holds(n) && (n == d + 1 || !holds(n - 1)), || {
                format!("d={d} K={k}: scan returned {n}")
            })?;
        }
    }
    Ok("d <= 4, K <= 3".into())
}

fn vc_sign_patterns(seed: u64, _: &HausdorffFn) -> Check {
    let model = CompositeModel::PhaseRetrieval { d: 2 };
    let points = vc_toolkit::random_points(&model, 6, seed);
    let polys = vc_toolkit::threshold_polys(&model, &points);
    let count = vc_toolkit::count_sign_patterns(&polys, 3, 2, 4000, seed).map_err(err)?;
    ensure(count.within_bound(), || {
        format!("{} patterns exceed bound {}", count.count, count.bound)
    })?;
    Ok(format!("{} patterns, bound {}", count.count, count.bound))
}

fn vc_certificates(seed: u64, _: &HausdorffFn) -> Check {
    let family = vc_toolkit::ThresholdFamily::Model(CompositeModel::PhaseRetrieval { d: 1 });
    let points = vec![
        SampleXi::PhaseRetrieval { a: vec![1.0], b: -1.0 },
        SampleXi::PhaseRetrieval { a: vec![2.0], b: 0.0 },
    ];
    let cert = vc_toolkit::check_shatter(&family, &points, 200, seed).map_err(err)?;
    ensure(
        cert.shattered && cert.verify(&family, &points) && cert.realized() == 4,
        || {
            format!(
                "certificate: shattered={}, realized={}",
                cert.shattered,
                cert.realized()
            )
        },
    )?;
    Ok("2-point phase-retrieval set shattered".into())
}

//! Fixtures shared by the benchmarks.

use subdiff_core::models::{draw_dataset, CompositeModel, DistributionSpec};
use subdiff_core::scalar_loss::ScalarConvexLoss;
use subdiff_core::set_calculus::ConvexBody;
use subdiff_core::subgradient_maps::EmpiricalObjective;

pub fn unit(d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|i| ((i + 1) as f64).sin()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Noiseless Gaussian data for `model` with `|.|` loss.
pub fn objective(model: CompositeModel, m: usize, seed: u64) -> (EmpiricalObjective, Vec<f64>) {
    let xbar = unit(model.param_dim());
    let data = draw_dataset(&model, &DistributionSpec::gaussian(1.0), &xbar, m, seed).expect("valid dataset");
    (
        EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data).expect("nonempty"),
        xbar,
    )
}

/// Zonotope in `R^d` with `k` deterministic generators.
pub fn zonotope(d: usize, k: usize, phase: f64) -> ConvexBody {
    let gens = (0..k)
        .map(|j| (0..d).map(|i| ((i * 7 + j * 3) as f64 + phase).cos()).collect())
        .collect();
    ConvexBody::zonotope(vec![phase; d], gens).expect("valid zonotope")
}

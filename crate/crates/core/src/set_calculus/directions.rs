use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::linalg::norm;
use crate::rng::rng_from;

/// Number of grid directions used in `d <= 3`.
pub const GRID_DIRECTIONS: usize = 10_000;
/// Number of random directions used in `d > 3`.
pub const RANDOM_DIRECTIONS: usize = 1_000;
/// Projected ascent steps applied to the best candidates.
pub const ASCENT_STEPS: usize = 50;

/// Deterministic Fibonacci lattice on the unit sphere in `R^3`.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden * i as f64;
            vec![rho * theta.cos(), rho * theta.sin(), z]
        })
        .collect()
}

/// Evenly spaced directions on the unit circle.
pub fn circle(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

/// Seeded uniform directions on the sphere in `R^d`.
pub fn random_sphere(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed, &[0x5e7d]);
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let nv = norm(&v);
            if nv > 1e-12 {
                break v.into_iter().map(|x| x / nv).collect();
            }
        })
        .collect()
}

/// Probe set used by the sampled support-function route.
pub fn sampling_grid(d: usize, seed: u64) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => circle(GRID_DIRECTIONS),
        3 => fibonacci_sphere(GRID_DIRECTIONS),
        _ => random_sphere(d, RANDOM_DIRECTIONS, seed),
    }
}

use proptest::prelude::*;
use subdiff_core::models::{draw_dataset, CompositeModel, Dataset, DistributionSpec, Response, SampleXi};
use subdiff_core::rng::rng_from;

mod common;

fn all_models() -> Vec<CompositeModel> {
    vec![
        CompositeModel::PhaseRetrieval { d: 4 },
        CompositeModel::MatrixSensing { dim: 3, rank: 2 },
        CompositeModel::BlindDeconv { d1: 3, d2: 2 },
        CompositeModel::Linear { d: 3 },
    ]
}

#[test]
fn gradients_match_finite_differences() {
    for model in all_models() {
        let d = model.param_dim();
        for trial in 0..20u64 {
            let mut rng = rng_from(trial, &[d as u64]);
            let xbar = common::gaussian(&mut rng, d);
            let xi = &draw_dataset(&model, &DistributionSpec::gaussian(1.0), &xbar, 1, trial).unwrap()[0];
            let x = common::gaussian(&mut rng, d);
            let grad = model.c_grad(&x, xi).unwrap();
            let h = 1e-6;
            for j in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (model.c_value(&xp, xi).unwrap() - model.c_value(&xm, xi).unwrap()) / (2.0 * h);
                assert!((fd - grad[j]).abs() < 1e-6, "{model:?} coord {j}: {fd} vs {}", grad[j]);
            }
        }
    }
}

#[test]
fn gaussian_covariance_is_identity() {
    let d = 5;
    let model = CompositeModel::PhaseRetrieval { d };
    let m = 100_000;
    let data = draw_dataset(&model, &DistributionSpec::gaussian(1.0), &vec![0.0; d], m, 77).unwrap();
    let mut cov = vec![0.0; d * d];
    for xi in &data {
        let SampleXi::PhaseRetrieval { a, .. } = xi else {
            unreachable!()
        };
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += a[i] * a[j] / m as f64;
            }
        }
    }
    for i in 0..d {
        cov[i * d + i] -= 1.0;
    }
    // spectral norm of the symmetric error by power iteration on E^2
    let mut v = vec![1.0; d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i * d + j] * v[j]).sum()).collect();
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        lambda = n;
        v = w.iter().map(|x| x / n).collect();
    }
    assert!(lambda < 0.05, "spectral error {lambda}");
}

#[test]
fn same_seed_same_bytes() {
    let model = CompositeModel::BlindDeconv { d1: 2, d2: 3 };
    let xbar = [0.5, -0.5, 1.0, 0.0, 2.0];
    let dist = DistributionSpec::gaussian(1.0);
    let bytes = |seed| {
        let ds = Dataset::new(model, seed, draw_dataset(&model, &dist, &xbar, 64, seed).unwrap()).unwrap();
        let mut buf = Vec::new();
        ds.write_binary(&mut buf).unwrap();
        buf
    };
    assert_eq!(bytes(3), bytes(3));
}

#[test]
fn thread_count_does_not_change_data() {
    let model = CompositeModel::MatrixSensing { dim: 3, rank: 2 };
    let xbar = [1.0, 0.0, 0.5, -0.5, 0.2, 0.1];
    let dist = DistributionSpec::gaussian(1.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| draw_dataset(&model, &dist, &xbar, 5000, 11).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn csv_and_binary_round_trip_bit_exact() {
    for model in all_models() {
        let d = model.param_dim();
        let mut rng = rng_from(9, &[]);
        let xbar = common::gaussian(&mut rng, d);
        let mut dist = DistributionSpec::rademacher(1.3);
        dist.response = Response::AdditiveGaussian { std: 0.1 };
        let ds = Dataset::new(model, 99, draw_dataset(&model, &dist, &xbar, 40, 5).unwrap()).unwrap();
        let mut csv = Vec::new();
        ds.write_csv(&mut csv).unwrap();
        let back = Dataset::read_csv(csv.as_slice()).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.samples.iter().zip(&ds.samples) {
            for (x, y) in a.components().iter().zip(b.components()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let mut bin = Vec::new();
        ds.write_binary(&mut bin).unwrap();
        assert_eq!(Dataset::read_binary(bin.as_slice()).unwrap(), ds);
    }
}

proptest! {
    #[test]
    fn quadratic_along_lines(seed in 0u64..5000, which in 0usize..4) {
        let model = all_models()[which];
        let d = model.param_dim();
        let mut rng = rng_from(seed, &[]);
        let xbar = common::gaussian(&mut rng, d);
        let xi = &draw_dataset(&model, &DistributionSpec::gaussian(1.0), &xbar, 1, seed).unwrap()[0];
        let x0 = common::gaussian(&mut rng, d);
        let v = common::gaussian(&mut rng, d);
        let at = |t: f64| {
            let x: Vec<f64> = x0.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            model.c_value(&x, xi).unwrap()
        };
        // exact quadratic through t = -1, 0, 1; check at other points
        let (fm, f0, fp) = (at(-1.0), at(0.0), at(1.0));
        let (a2, a1) = (0.5 * (fp + fm) - f0, 0.5 * (fp - fm));
        for t in [-2.0, -0.3, 0.7, 1.9] {
            let q = f0 + a1 * t + a2 * t * t;
            let scale = 1.0 + f0.abs() + a1.abs() + a2.abs();
            prop_assert!((at(t) - q).abs() < 1e-8 * scale * 4.0);
        }
        prop_assert!(model.degree() <= 2);
    }

    #[test]
    fn phase_retrieval_is_homogeneous(seed in 0u64..5000, alpha in -3.0f64..3.0) {
        let model = CompositeModel::PhaseRetrieval { d: 3 };
        let mut rng = rng_from(seed, &[]);
        let a = common::gaussian(&mut rng, 3);
        let x = common::gaussian(&mut rng, 3);
        let xi = SampleXi::PhaseRetrieval { a, b: 0.0 };
        let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let lhs = model.c_value(&ax, &xi).unwrap();
        let rhs = alpha * alpha * model.c_value(&x, &xi).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }
}

#[test]
fn prefixes_agree_across_sizes() {
    let model = CompositeModel::Linear { d: 2 };
    let dist = DistributionSpec::rademacher(4.0);
    let a = draw_dataset(&model, &dist, &[0.0, 0.0], 10, 1).unwrap();
    let b = draw_dataset(&model, &dist, &[0.0, 0.0], 20, 1).unwrap();
    assert_eq!(a[..], b[..10]);
}

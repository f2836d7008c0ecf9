use proptest::prelude::*;
use subdiff_core::scalar_loss::{builtin, ScalarConvexLoss};
use subdiff_core::set_calculus::Shape;

fn interval(h: &ScalarConvexLoss, z: f64) -> (f64, f64) {
    match *h.subdiff_interval(z).shape() {
        Shape::Interval { lo, hi } => (lo, hi),
        ref other => panic!("{other:?}"),
    }
}

fn losses() -> Vec<ScalarConvexLoss> {
    vec![
        ScalarConvexLoss::abs(),
        ScalarConvexLoss::hinge(),
        ScalarConvexLoss::pinball(0.3).unwrap(),
        ScalarConvexLoss::square(),
        ScalarConvexLoss::piecewise_linear(&[-1.0, 0.5, 2.0], &[-2.0, -0.5, 0.25, 3.0], 1.0).unwrap(),
        ScalarConvexLoss::abs().scaled(2.0).unwrap(),
    ]
}

#[test]
fn builtin_names_resolve() {
    for name in ["abs", "hinge", "square", "pinball(0.25)"] {
        assert!(builtin(name).is_ok(), "{name}");
    }
    assert!(builtin("cubic").is_err());
    assert!(builtin("pinball(1.5)").is_err());
}

#[test]
fn random_piecewise_linear_decomposes() {
    use rand::Rng;
    let mut rng = subdiff_core::rng::rng_from(5, &[]);
    for _ in 0..200 {
        let n = rng.gen_range(1..6);
        let mut bps: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let mut slopes = vec![rng.gen_range(-3.0..0.0)];
        for _ in 0..bps.len() {
            let last = *slopes.last().unwrap();
            slopes.push(last + rng.gen_range(0.01..2.0));
        }
        let h = ScalarConvexLoss::piecewise_linear(&bps, &slopes, rng.gen_range(-1.0..1.0)).unwrap();
        // kinks recomputed from the slopes directly
        assert_eq!(h.kinks().len(), bps.len());
        for (j, k) in h.kinks().iter().enumerate() {
            assert_eq!(k.location, bps[j]);
            assert!((k.jump - (slopes[j + 1] - slopes[j])).abs() < 1e-12);
        }
        let grid: Vec<f64> = (0..=4000).map(|i| -4.0 + 2e-3 * i as f64).collect();
        let report = h.decompose_check(&grid).unwrap();
        assert!(report.max_residual < 1e-12, "{}", report.max_residual);
        assert!(report.ok());
    }
}

#[test]
fn abs_decomposition_residual_is_zero() {
    let grid: Vec<f64> = (0..=4000).map(|i| -2.0 + 1e-3 * i as f64).collect();
    for h in [ScalarConvexLoss::abs(), ScalarConvexLoss::hinge()] {
        assert_eq!(h.decompose_check(&grid).unwrap().max_residual, 0.0);
    }
}

proptest! {
    #[test]
    fn selection_in_interval(z in -5.0f64..5.0, snap in any::<bool>()) {
        let z = if snap { z.round() * 0.5 } else { z };
        for h in losses() {
            let (lo, hi) = interval(&h, z);
            let g = h.selection_g(z);
            prop_assert!(g >= lo - 1e-12 && g <= hi + 1e-12, "{} at {z}", h.name());
            prop_assert_eq!(g, hi);
        }
    }

    #[test]
    fn selection_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        for h in losses() {
            prop_assert!(h.selection_g(a) <= h.selection_g(b));
        }
    }

    #[test]
    fn zeta_scales_with_jumps(alpha in 0.01f64..10.0) {
        for h in losses() {
            let jumps: f64 = h.kinks().iter().map(|k| k.jump).sum();
            let scaled = h.scaled(alpha).unwrap();
            prop_assert!((scaled.zeta() - (1.0 + alpha * jumps)).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoints_match_finite_differences(z in -5.0f64..5.0) {
        for h in losses() {
            if h.kinks().iter().any(|k| (k.location - z).abs() < 1e-4) {
                continue;
            }
            let step = 1e-6;
            let fd = (h.eval(z + step) - h.eval(z - step)) / (2.0 * step);
            let (lo, hi) = interval(&h, z);
            prop_assert!((lo - fd).abs() <= 1e-5 && (hi - fd).abs() <= 1e-5, "{}: {fd} vs [{lo}, {hi}]", h.name());
        }
    }

    #[test]
    fn reconstruction_is_midpoint_convex(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        for h in losses() {
            let mid = h.eval(0.5 * (a + b));
            prop_assert!(mid <= 0.5 * (h.eval(a) + h.eval(b)) + 1e-9);
        }
    }
}

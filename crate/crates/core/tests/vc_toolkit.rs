mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use subdiff_core::models::{CompositeModel, SampleXi};
use subdiff_core::rng::rng_from;
use subdiff_core::vc_toolkit::{
    check_shatter, count_sign_patterns, delta_rate, labeling_of, random_points, sign_pattern_bound, threshold_polys,
    vc_lower_bound, vc_lower_bound_with, vc_upper_bound_poly, Poly, ThresholdFamily,
};
use subdiff_core::Error;

/// Exact integer form of `(50 K N / (d+1))^(d+1) < 2^N`.
fn scan_oracle(d: u32, k: u128) -> usize {
    (1..200u32)
        .find(|&n| n > d && (50 * k * n as u128).pow(d + 1) < (1u128 << n) * ((d + 1) as u128).pow(d + 1))
        .unwrap() as usize
}

fn pr(a: f64, b: f64) -> SampleXi {
    SampleXi::PhaseRetrieval { a: vec![a], b }
}

#[test]
fn upper_bound_matches_integer_scan() {
    for d in 1..=3u32 {
        for k in 1..=3u128 {
            assert_eq!(
                vc_upper_bound_poly(d as usize, k as usize).unwrap(),
                scan_oracle(d, k),
                "d={d} K={k}"
            );
        }
    }
    for d in 1..8 {
        for k in 1..5 {
            let b = vc_upper_bound_poly(d, k).unwrap();
            assert!(vc_upper_bound_poly(d, k + 1).unwrap() >= b);
            assert!(vc_upper_bound_poly(d + 1, k).unwrap() >= b);
        }
    }
}

#[test]
fn delta_rate_arithmetic() {
    let base = delta_rate(1, 0.0, 1, (-1f64).exp()).unwrap();
    assert!((base - 2f64.sqrt()).abs() < 1e-15);
    // With vc = 0 and delta = 1/e the numerator is constant, so Delta ~ m^(-1/2).
    let r = delta_rate(3, 0.0, 4, (-1f64).exp()).unwrap() / delta_rate(3, 0.0, 1, (-1f64).exp()).unwrap();
    assert!((r - 0.5).abs() < 1e-15);
    let d = 10.0f64;
    let vc = d * d.ln();
    let expect = ((d + vc * 1024f64.ln() + 20f64.ln()) / 1024.0).sqrt();
    let got = delta_rate(10, vc, 1 << 10, 0.05).unwrap();
    assert!((got - expect).abs() < 1e-14);
    assert!((got - 0.410_552_658).abs() < 1e-9, "{got}");
    assert!(delta_rate(1, 0.0, 1, 0.0).is_err());
    assert!(delta_rate(1, -1.0, 1, 0.5).is_err());
}

#[test]
fn hand_witnesses_replay_and_search_agrees() {
    let family = ThresholdFamily::Model(CompositeModel::PhaseRetrieval { d: 1 });
    let points = vec![pr(1.0, -1.0), pr(2.0, 0.0)];
    // c1 = x^2 + 1, c2 = 4x^2
    let witnesses = [(0b00, 0.0, 5.0), (0b01, 0.0, 0.5), (0b10, 1.0, 3.0), (0b11, 0.0, 0.0)];
    for (labels, x, t) in witnesses {
        assert_eq!(labeling_of(&family, &points, &[x], t), labels);
    }
    let cert = check_shatter(&family, &points, 200, 7).unwrap();
    assert!(cert.shattered);
    assert!(cert.verify(&family, &points));
    assert_eq!(cert.realized(), 4);
    let json: serde_json::Value = serde_json::from_str(&cert.to_json().unwrap()).unwrap();
    assert_eq!(json["labelings"].as_array().unwrap().len(), 4);
    assert_eq!(json["seed"], 7);
}

#[test]
fn single_point_is_shattered_by_every_model() {
    for model in [
        CompositeModel::PhaseRetrieval { d: 2 },
        CompositeModel::MatrixSensing { dim: 2, rank: 1 },
        CompositeModel::BlindDeconv { d1: 2, d2: 2 },
        CompositeModel::Linear { d: 1 },
    ] {
        let family = ThresholdFamily::Model(model);
        let cert = check_shatter(&family, &random_points(&model, 1, 3), 100, 1).unwrap();
        assert!(cert.shattered && cert.verify(&family, &random_points(&model, 1, 3)));
    }
}

#[test]
fn pr_line_does_not_shatter_five_points() {
    // {a^2 x^2 - b >= t} are half-planes in (a^2, b) with normals in a half-circle.
    let family = ThresholdFamily::Model(CompositeModel::PhaseRetrieval { d: 1 });
    let points: Vec<SampleXi> = (0..5)
        .map(|i| pr(1.0 + i as f64 * 0.3, (i as f64 * 1.7).sin()))
        .collect();
    let cert = check_shatter(&family, &points, 2000, 11).unwrap();
    assert!(!cert.shattered);
    assert!(cert.verify(&family, &points));
    assert!(cert.realized() < 32);
    let n = 2 + vc_upper_bound_poly(1, 2).unwrap();
    let many: Vec<SampleXi> = (0..n).map(|i| pr(i as f64, 0.0)).collect();
    assert!(matches!(
        check_shatter(&family, &many, 10, 0),
        Err(Error::TooManyPoints { n: 22, max: 16 })
    ));
    assert!(matches!(check_shatter(&family, &points, 0, 0), Err(Error::ZeroBudget)));
}

#[test]
fn lower_bound_examples() {
    let constant = ThresholdFamily::Custom {
        name: "constant".into(),
        dim: 1,
        degree: 1,
        c: Arc::new(|_, xi| xi.response()),
    };
    let sampler = |n: usize, seed: u64| random_points(&CompositeModel::Linear { d: 1 }, n, seed);
    assert_eq!(vc_lower_bound_with(&constant, 4, 300, 5, sampler).unwrap(), 1);

    let linear = ThresholdFamily::Model(CompositeModel::Linear { d: 1 });
    assert!(vc_lower_bound(&linear, 4, 2000, 5).unwrap() >= 2);
    let pr2 = ThresholdFamily::Model(CompositeModel::PhaseRetrieval { d: 2 });
    assert!(vc_lower_bound(&pr2, 5, 2000, 5).unwrap() >= 3);
}

#[test]
fn shatter_is_deterministic() {
    let model = CompositeModel::BlindDeconv { d1: 1, d2: 2 };
    let family = ThresholdFamily::Model(model);
    let pts = random_points(&model, 4, 9);
    let a = check_shatter(&family, &pts, 500, 2).unwrap();
    let b = check_shatter(&family, &pts, 500, 2).unwrap();
    assert_eq!(a, b);
}

fn line(a: f64, b: f64, c: f64) -> Poly {
    Arc::new(move |x: &[f64]| a * x[0] + b * x[1] - c)
}

#[test]
fn sign_pattern_examples() {
    let one: Vec<Poly> = vec![Arc::new(|x: &[f64]| x[0] - 0.5)];
    let r = count_sign_patterns(&one, 1, 1, 200, 3).unwrap();
    assert_eq!(r.count, 3);
    assert!(r.within_bound());

    let two = vec![line(1.0, 0.0, 0.0), line(0.0, 1.0, 0.0)];
    let r = count_sign_patterns(&two, 2, 1, 400, 3).unwrap();
    assert!(r.patterns.iter().filter(|p| !p.contains(&0)).count() >= 4);
    assert_eq!(r.bound, 2500.0);

    // Four lines in general position: 11 regions, 16 edges, 6 vertices.
    let four = vec![
        line(1.0, 0.0, 0.0),
        line(0.0, 1.0, 0.0),
        line(1.0, 1.0, 1.0),
        line(1.0, -1.0, 2.0),
    ];
    let r = count_sign_patterns(&four, 2, 1, 20_000, 4).unwrap();
    assert_eq!(r.patterns.iter().filter(|p| !p.contains(&0)).count(), 11);
    assert!(r.count <= 33 && r.count >= 20, "{}", r.count);
    assert!(matches!(count_sign_patterns(&four, 2, 1, 0, 4), Err(Error::ZeroBudget)));
}

#[test]
fn random_quadratics_respect_bound() {
    let mut rng = rng_from(21, &[]);
    let polys: Vec<Poly> = (0..10)
        .map(|_| {
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Arc::new(move |x: &[f64]| {
                c[0] * x[0] * x[0] + c[1] * x[0] * x[1] + c[2] * x[1] * x[1] + c[3] * x[0] + c[4] * x[1] + c[5]
            }) as Poly
        })
        .collect();
    let r = count_sign_patterns(&polys, 2, 2, 100_000, 1).unwrap();
    assert_eq!(r.bound, 250_000.0);
    assert!(r.within_bound());
    assert_eq!(r, count_sign_patterns(&polys, 2, 2, 100_000, 1).unwrap());
    // Each pattern is realized by some evaluation point, so the count cannot
    // exceed the number of points examined.
    assert!(r.count <= 100_000);
}

#[test]
fn threshold_polys_track_the_model() {
    let model = CompositeModel::PhaseRetrieval { d: 2 };
    let pts = random_points(&model, 6, 4);
    let polys = threshold_polys(&model, &pts);
    let z = [0.3, -1.2, 0.25];
    for (p, xi) in polys.iter().zip(&pts) {
        let expect = model.c_value(&z[..2], xi).unwrap() - z[2];
        assert!((p(&z) - expect).abs() < 1e-14);
    }
    let r = count_sign_patterns(&polys, 3, 2, 5000, 2).unwrap();
    assert!(r.within_bound());
    assert_eq!(r.bound, sign_pattern_bound(3, 2, 6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn certificates_reverify_and_count_labelings(seed in 0u64..1000, n in 1usize..5) {
        let model = CompositeModel::PhaseRetrieval { d: 2 };
        let family = ThresholdFamily::Model(model);
        let pts = random_points(&model, n, seed);
        let cert = check_shatter(&family, &pts, 300, seed).unwrap();
        prop_assert!(cert.verify(&family, &pts));
        for l in &cert.labelings {
            if let Some(w) = &l.witness {
                let replay = pts.iter().enumerate().all(|(i, p)| {
                    (model.c_value(&w.x, p).unwrap() >= w.t) == (l.labels >> i & 1 == 1)
                });
                prop_assert!(replay);
            }
        }
        if cert.shattered {
            prop_assert_eq!(cert.realized(), 1 << n);
        }
    }
}

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use subdiff_core::linalg::{dist, norm};
use subdiff_core::models::{draw_dataset, CompositeModel, DistributionSpec, SampleXi};
use subdiff_core::rng::rng_from;
use subdiff_core::scalar_loss::ScalarConvexLoss;
use subdiff_core::set_calculus::{dist_point_to_body, hausdorff, minkowski_sum, ConvexBody};
use subdiff_core::subgradient_maps::{
    closed_form_g, pointwise_gap, population_g, sup_gap_over_ball, write_gap_csv, EmpiricalObjective, HausdorffBasis,
    OracleStrategy, PopulationOracle,
};

fn gaussian_vec(seed: u64, d: usize, tag: u64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[tag]);
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn naive_g_s(model: &CompositeModel, loss: &ScalarConvexLoss, data: &[SampleXi], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for xi in data.iter().rev() {
        let c = model.c_value(x, xi).unwrap();
        let grad = model.c_grad(x, xi).unwrap();
        let g = loss.selection_g(c);
        for (o, v) in out.iter_mut().zip(grad) {
            *o += g * v / data.len() as f64;
        }
    }
    out
}

#[test]
fn g_s_matches_naive_loop() {
    let xbar = unit(gaussian_vec(1, 4, 0));
    for model in [
        CompositeModel::PhaseRetrieval { d: 4 },
        CompositeModel::MatrixSensing { dim: 2, rank: 2 },
        CompositeModel::BlindDeconv { d1: 2, d2: 2 },
    ] {
        let data = draw_dataset(&model, &DistributionSpec::gaussian(1.0), &xbar, 100, 3).unwrap();
        let obj = EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data.clone()).unwrap();
        let x = gaussian_vec(2, 4, 1);
        let fast = obj.g_s(&x).unwrap();
        let slow = naive_g_s(&model, &ScalarConvexLoss::abs(), &data, &x);
        assert!(dist(&fast, &slow) < 1e-12, "{model:?}");
    }
}

fn check_closed_form(model: CompositeModel, loss: ScalarConvexLoss, xbar: &[f64], x: &[f64], seed: u64) {
    let dist_spec = DistributionSpec::gaussian(1.0);
    let (exact, quad_err) = closed_form_g(&model, &loss, &dist_spec, xbar, x).unwrap();
    let (mc, err) = population_g(
        OracleStrategy::MegaSample { m_pop: 1_000_000, seed },
        &model,
        &loss,
        &dist_spec,
        xbar,
        x,
    )
    .unwrap();
    let gap = dist(&exact, &mc);
    assert!(quad_err < 1e-8);
    assert!(
        gap <= err,
        "{model:?} {}: |closed - mc| = {gap} > bound {err}",
        loss.name()
    );
}

#[test]
fn closed_forms_agree_with_mega_sample() {
    let xbar = unit(gaussian_vec(10, 6, 0));
    let x = gaussian_vec(11, 6, 0);
    check_closed_form(
        CompositeModel::PhaseRetrieval { d: 6 },
        ScalarConvexLoss::abs(),
        &xbar,
        &x,
        100,
    );
    check_closed_form(
        CompositeModel::PhaseRetrieval { d: 6 },
        ScalarConvexLoss::hinge(),
        &xbar,
        &x,
        101,
    );
    check_closed_form(
        CompositeModel::MatrixSensing { dim: 3, rank: 2 },
        ScalarConvexLoss::abs(),
        &xbar,
        &x,
        102,
    );
    check_closed_form(
        CompositeModel::BlindDeconv { d1: 3, d2: 3 },
        ScalarConvexLoss::abs(),
        &xbar,
        &x,
        103,
    );
    check_closed_form(
        CompositeModel::BlindDeconv { d1: 3, d2: 3 },
        ScalarConvexLoss::pinball(0.3).unwrap(),
        &xbar,
        &x,
        104,
    );
    check_closed_form(CompositeModel::Linear { d: 6 }, ScalarConvexLoss::abs(), &xbar, &x, 105);
    check_closed_form(
        CompositeModel::Linear { d: 6 },
        ScalarConvexLoss::square(),
        &xbar,
        &x,
        106,
    );
    // dependent blocks: y parallel to ybar
    let mut xd = xbar.clone();
    xd[..3].iter_mut().for_each(|v| *v *= -0.5);
    check_closed_form(
        CompositeModel::BlindDeconv { d1: 3, d2: 3 },
        ScalarConvexLoss::abs(),
        &xbar,
        &xd,
        107,
    );
}

#[test]
fn linear_square_matches_gaussian_moments() {
    // h(z) = z^2, so G(x) = 2 E[(<a,x> - b) a] = 2 (E[a a^T] x - E[b a])
    let xbar = vec![0.5, -1.0, 0.25];
    let x = vec![1.0, 0.0, -0.5];
    let model = CompositeModel::Linear { d: 3 };
    let dist_spec = DistributionSpec::gaussian(1.0);
    let (g, err) = population_g(
        OracleStrategy::MegaSample {
            m_pop: 200_000,
            seed: 4,
        },
        &model,
        &ScalarConvexLoss::square(),
        &dist_spec,
        &xbar,
        &x,
    )
    .unwrap();
    let analytic: Vec<f64> = x.iter().zip(&xbar).map(|(a, b)| 2.0 * (a - b)).collect();
    assert!(dist(&g, &analytic) <= err, "{g:?} vs {analytic:?} (bound {err})");
}

#[test]
fn mega_sample_error_shrinks_like_root_m() {
    let model = CompositeModel::PhaseRetrieval { d: 3 };
    let xbar = [1.0, 0.0, 0.0];
    let x = [0.3, 0.6, -0.2];
    let dist_spec = DistributionSpec::gaussian(1.0);
    for seed in 0..20 {
        let bound = |m_pop| {
            population_g(
                OracleStrategy::MegaSample { m_pop, seed },
                &model,
                &ScalarConvexLoss::abs(),
                &dist_spec,
                &xbar,
                &x,
            )
            .unwrap()
            .1
        };
        let ratio = bound(40_000) / bound(20_000);
        assert!((0.6..=0.81).contains(&ratio), "seed {seed}: ratio {ratio}");
    }
}

#[test]
fn population_at_zero_is_zero() {
    let model = CompositeModel::PhaseRetrieval { d: 3 };
    let (g, err) = population_g(
        OracleStrategy::MegaSample { m_pop: 1000, seed: 1 },
        &model,
        &ScalarConvexLoss::abs(),
        &DistributionSpec::gaussian(1.0),
        &[1.0, 0.0, 0.0],
        &[0.0; 3],
    )
    .unwrap();
    assert_eq!(g, vec![0.0; 3]);
    assert_eq!(err, 0.0);
    let rademacher = PopulationOracle::new(
        OracleStrategy::ClosedForm,
        model,
        ScalarConvexLoss::abs(),
        &DistributionSpec::rademacher(1.0),
        &[1.0, 0.0, 0.0],
    );
    assert!(rademacher.is_err());
}

#[test]
fn zonotope_matches_interval_minkowski_average() {
    // two samples active at x: c_i(x) = 0 exactly
    let model = CompositeModel::PhaseRetrieval { d: 2 };
    let x = [1.0, 1.0];
    let data = vec![
        SampleXi::PhaseRetrieval {
            a: vec![1.0, 0.0],
            b: 1.0,
        },
        SampleXi::PhaseRetrieval {
            a: vec![0.0, 2.0],
            b: 4.0,
        },
        SampleXi::PhaseRetrieval {
            a: vec![1.0, 1.0],
            b: 1.0,
        },
    ];
    let loss = ScalarConvexLoss::abs();
    let obj = EmpiricalObjective::new(model, loss.clone(), data.clone()).unwrap();
    let z = obj.empirical_subdiff(&x).unwrap();
    let mut acc = ConvexBody::point(vec![0.0, 0.0]).unwrap();
    for xi in &data {
        let c = model.c_value(&x, xi).unwrap();
        let grad = model.c_grad(&x, xi).unwrap();
        let (lo, hi) = loss.one_sided_derivatives(c);
        let seg = ConvexBody::vpolytope(vec![
            grad.iter().map(|g| lo * g / 3.0).collect(),
            grad.iter().map(|g| hi * g / 3.0).collect(),
        ])
        .unwrap();
        acc = minkowski_sum(&acc, &seg).unwrap();
    }
    assert!(hausdorff(&z, &acc).unwrap() < 1e-10);
}

#[test]
fn abs_single_sample_at_kink() {
    let model = CompositeModel::Linear { d: 2 };
    let obj = EmpiricalObjective::new(
        model,
        ScalarConvexLoss::abs(),
        vec![SampleXi::Linear {
            phi: vec![2.0, -1.0],
            b: 1.0,
        }],
    )
    .unwrap();
    let z = obj.empirical_subdiff(&[1.0, 1.0]).unwrap();
    let seg = ConvexBody::vpolytope(vec![vec![-2.0, 1.0], vec![2.0, -1.0]]).unwrap();
    assert!(hausdorff(&z, &seg).unwrap() < 1e-15);
}

#[test]
fn self_oracle_has_zero_gaps() {
    let model = CompositeModel::PhaseRetrieval { d: 3 };
    let data = draw_dataset(&model, &DistributionSpec::gaussian(1.0), &[1.0, 0.0, 0.0], 50, 2).unwrap();
    let obj = EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data).unwrap();
    let oracle = PopulationOracle::from_objective(&obj);
    let rec = pointwise_gap(&obj, &oracle, &[0.2, -0.4, 0.9]).unwrap();
    assert_eq!(rec.gap_selection, 0.0);
    assert_eq!(rec.gap_hausdorff, 0.0);
    assert_eq!(rec.basis, HausdorffBasis::Exact);
    let sup = sup_gap_over_ball(&obj, &oracle, &[0.0; 3], 1.0, 20, 5).unwrap();
    assert_eq!(sup.value, 0.0);
}

#[test]
fn two_kink_pair_selection_gap_is_one() {
    // |x| against 1/2 |x - 1/n| + 1/2 |x + 1/n|, both as linear-model objectives
    let model = CompositeModel::Linear { d: 1 };
    for n in [1.0, 3.0, 10.0] {
        let obj = EmpiricalObjective::new(
            model,
            ScalarConvexLoss::abs(),
            vec![SampleXi::Linear { phi: vec![1.0], b: 0.0 }],
        )
        .unwrap();
        let pop = vec![
            SampleXi::Linear {
                phi: vec![1.0],
                b: 1.0 / n,
            },
            SampleXi::Linear {
                phi: vec![1.0],
                b: -1.0 / n,
            },
        ];
        let oracle = PopulationOracle::new(
            OracleStrategy::Dataset(pop),
            model,
            ScalarConvexLoss::abs(),
            &DistributionSpec::gaussian(1.0),
            &[0.0],
        )
        .unwrap();
        let rec = pointwise_gap(&obj, &oracle, &[1.0 / (2.0 * n)]).unwrap();
        assert_eq!(rec.gap_selection, 1.0);
        assert_eq!(rec.gap_hausdorff, 1.0);
    }
}

#[test]
fn pr_gap_calibration() {
    let model = CompositeModel::PhaseRetrieval { d: 3 };
    let dist_spec = DistributionSpec::gaussian(1.0);
    for seed in 0..10 {
        let xbar = unit(gaussian_vec(seed, 3, 99));
        let data = draw_dataset(&model, &dist_spec, &xbar, 500, seed).unwrap();
        let obj = EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data).unwrap();
        let oracle = PopulationOracle::new(
            OracleStrategy::ClosedForm,
            model,
            ScalarConvexLoss::abs(),
            &dist_spec,
            &xbar,
        )
        .unwrap();
        for probe in 0..20 {
            let mut x = gaussian_vec(seed, 3, 1000 + probe);
            let n = norm(&x);
            x.iter_mut().for_each(|v| *v /= n.max(1.0));
            let rec = pointwise_gap(&obj, &oracle, &x).unwrap();
            assert!(rec.gap_selection < 0.5, "seed {seed}: {}", rec.gap_selection);
            assert_eq!(rec.basis, HausdorffBasis::SingletonApprox);
        }
    }
}

#[test]
fn sup_gap_small_radius_and_budget_doubling() {
    let model = CompositeModel::PhaseRetrieval { d: 4 };
    let dist_spec = DistributionSpec::gaussian(1.0);
    let xbar = unit(gaussian_vec(3, 4, 0));
    let data = draw_dataset(&model, &dist_spec, &xbar, 256, 7).unwrap();
    let obj = EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data).unwrap();
    let oracle = PopulationOracle::new(
        OracleStrategy::ClosedForm,
        model,
        ScalarConvexLoss::abs(),
        &dist_spec,
        &xbar,
    )
    .unwrap();
    let x0 = gaussian_vec(4, 4, 0);
    let at = pointwise_gap(&obj, &oracle, &x0).unwrap().gap_selection;
    let tiny = sup_gap_over_ball(&obj, &oracle, &x0, 1e-13, 5, 1).unwrap();
    assert!((tiny.value - at).abs() < 1e-9);
    for seed in 0..3 {
        let mut prev = 0.0;
        for budget in [1, 2, 4, 8, 16, 32, 64] {
            let s = sup_gap_over_ball(&obj, &oracle, &[0.0; 4], 1.0, budget, seed).unwrap();
            assert!(s.value >= prev, "budget {budget}: {} < {prev}", s.value);
            assert!(norm(&s.argmax) <= 1.0 + 1e-12);
            prev = s.value;
        }
    }
    assert!(sup_gap_over_ball(&obj, &oracle, &[0.0; 4], 1.0, 0, 1).is_err());
    assert!(sup_gap_over_ball(&obj, &oracle, &[0.0; 4], 0.0, 5, 1).is_err());
}

#[test]
fn pr_selection_lipschitz_without_sign_changes() {
    let model = CompositeModel::PhaseRetrieval { d: 3 };
    let xbar = [0.0, 1.0, 0.0];
    let data = draw_dataset(&model, &DistributionSpec::gaussian(1.0), &xbar, 64, 12).unwrap();
    let obj = EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data.clone()).unwrap();
    let lip: f64 = data
        .iter()
        .map(|xi| match xi {
            SampleXi::PhaseRetrieval { a, .. } => 2.0 * norm(a).powi(2),
            _ => unreachable!(),
        })
        .sum::<f64>()
        / data.len() as f64;
    let mut checked = 0;
    for k in 0..400 {
        let x = gaussian_vec(k, 3, 1);
        let dx = gaussian_vec(k, 3, 2);
        let y: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + 0.01 * b).collect();
        let same = data
            .iter()
            .all(|xi| model.c_value(&x, xi).unwrap().signum() == model.c_value(&y, xi).unwrap().signum());
        if !same {
            continue;
        }
        checked += 1;
        let lhs = dist(&obj.g_s(&x).unwrap(), &obj.g_s(&y).unwrap());
        assert!(lhs <= lip * dist(&x, &y) * (1.0 + 1e-12));
    }
    assert!(checked > 50);
}

#[test]
fn gap_csv_layout() {
    let rec = subdiff_core::subgradient_maps::GapRecord {
        x: vec![0.5, -1.0],
        gap_selection: 0.25,
        gap_hausdorff: 0.5,
        basis: HausdorffBasis::SingletonApprox,
        oracle_err: 0.0,
    };
    let mut buf = Vec::new();
    write_gap_csv(&[rec], 9, 128, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text,
        "x0,x1,gap_selection,gap_hausdorff,oracle_err,seed,m,d\n0.5,-1,0.25,0.5,0,9,128,2\n"
    );
}

fn model_strategy() -> impl Strategy<Value = CompositeModel> {
    prop_oneof![
        Just(CompositeModel::PhaseRetrieval { d: 3 }),
        Just(CompositeModel::MatrixSensing { dim: 2, rank: 2 }),
        Just(CompositeModel::BlindDeconv { d1: 2, d2: 2 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_lies_in_zonotope(model in model_strategy(), seed in 0u64..1000, at_truth in any::<bool>()) {
        let d = model.param_dim();
        let xbar = gaussian_vec(seed, d, 0);
        let data = draw_dataset(&model, &DistributionSpec::gaussian(1.0), &xbar, 20, seed).unwrap();
        let obj = EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data).unwrap();
        let x = if at_truth { xbar.clone() } else { gaussian_vec(seed, d, 1) };
        let z = obj.empirical_subdiff(&x).unwrap();
        prop_assert!(dist_point_to_body(&obj.g_s(&x).unwrap(), &z).unwrap() < 1e-10);
    }

    #[test]
    fn scaling_loss_scales_everything(seed in 0u64..1000, alpha in 0.1f64..8.0) {
        let model = CompositeModel::PhaseRetrieval { d: 2 };
        let xbar = gaussian_vec(seed, 2, 0);
        let data = draw_dataset(&model, &DistributionSpec::gaussian(1.0), &xbar, 15, seed).unwrap();
        let base = EmpiricalObjective::new(model, ScalarConvexLoss::abs(), data.clone()).unwrap();
        let scaled = EmpiricalObjective::new(model, ScalarConvexLoss::abs().scaled(alpha).unwrap(), data).unwrap();
        let x = gaussian_vec(seed, 2, 1);
        let g0 = base.g_s(&x).unwrap();
        let g1 = scaled.g_s(&x).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            prop_assert!((alpha * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let z0 = base.empirical_subdiff(&xbar).unwrap();
        let z1 = scaled.empirical_subdiff(&xbar).unwrap();
        let zs = match z0.shape() {
            subdiff_core::set_calculus::Shape::Zonotope { center, generators } => ConvexBody::zonotope(
                center.iter().map(|v| alpha * v).collect(),
                generators.iter().map(|g| g.iter().map(|v| alpha * v).collect()).collect(),
            ).unwrap(),
            _ => unreachable!(),
        };
        prop_assert!(hausdorff(&z1, &zs).unwrap() <= 1e-12 * (1.0 + z1.radius_bound()));
    }
}

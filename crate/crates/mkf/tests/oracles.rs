//! Statistical oracle tests: the exact moment machinery against seeded Monte
//! Carlo estimates, the moment filter's one-step moments against sampling,
//! the EKF's known bias on the same case, and symbolic Jacobians against
//! finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mkf::dist::Distribution1D;
use mkf::expand::{expectation, Expander, GaussianBlock, RandomVectorSpec};
use mkf::expr::{parse, MomentExpr};
use mkf::filters::{ekf_predict, mkf_predict, GaussianBelief};
use mkf::linalg::{Mat, SymMatrix};
use mkf::mc::mc_expectation;
use mkf::models::{diff_drive_model, robot_model, DiffDriveConfig, LandmarkMap, RangeBearingNoise};

fn random_distribution(rng: &mut ChaCha8Rng) -> Distribution1D {
    match rng.random_range(0..3) {
        0 => Distribution1D::gaussian(
            rng.random_range(-1.5..1.5),
            rng.random_range(0.01..1.5),
        )
        .unwrap(),
        1 => Distribution1D::exponential(rng.random_range(0.4..2.5)).unwrap(),
        _ => {
            let a = rng.random_range(-2.0..1.0);
            let b = a + rng.random_range(0.2..2.5);
            Distribution1D::uniform(a, b).unwrap()
        }
    }
}

#[test]
fn one_dimensional_moments_agree_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut failures = 0;
    for case in 0..100 {
        let d = random_distribution(&mut rng);
        // total order <= 6
        let a1 = rng.random_range(0..=3u32);
        let a2 = rng.random_range(0..=2u32);
        let a3 = rng.random_range(0..=(6 - a1 - a2).min(2));
        let scale = rng.random_range(0.3..2.0);
        let spec = mkf::dist::MomentSpec1D::new(a1, a2, a3, scale).unwrap();
        let exact = mkf::dist::mixed_moment_1d(&d, &spec).unwrap();

        let rv = RandomVectorSpec::independent(vec![("t".into(), d)]).unwrap();
        let e = {
            let base = MomentExpr::product(vec![
                MomentExpr::Constant(scale),
                MomentExpr::var("t"),
            ]);
            let mut factors = vec![MomentExpr::pow(base.clone(), a1)];
            factors.push(MomentExpr::pow(MomentExpr::cos(base.clone()).unwrap(), a2));
            factors.push(MomentExpr::pow(MomentExpr::sin(base).unwrap(), a3));
            MomentExpr::product(factors)
        };
        let est = mc_expectation(&e, &rv, 200_000, 9000 + case).unwrap();
        if (est.value - exact).abs() > 5.0 * est.std_error.max(1e-12) {
            eprintln!(
                "case {case}: exact {exact} vs mc {} (se {}) for {d:?} spec {spec:?}",
                est.value, est.std_error
            );
            failures += 1;
        }
    }
    assert!(failures <= 1, "{failures} of 100 cases outside 5 sigma");
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = rng.random_range(-scale..scale);
        }
    }
    let spd = m.matmul(&m.transpose());
    SymMatrix::from_fn(n, |i, j| spd[(i, j)] + if i == j { 0.01 } else { 0.0 })
}

fn random_mtp_expr(rng: &mut ChaCha8Rng, names: &[String]) -> MomentExpr {
    // product of up to 4 unit factors over the given variables
    let mut factors = Vec::new();
    let mut order = 0u32;
    while order < 4 {
        let take = rng.random_range(0..=2u32);
        if take == 0 {
            break;
        }
        let name = &names[rng.random_range(0..names.len())];
        let v = MomentExpr::var(name.clone());
        let f = match rng.random_range(0..3) {
            0 => MomentExpr::pow(v, take),
            1 => MomentExpr::pow(MomentExpr::cos(v).unwrap(), take),
            _ => MomentExpr::pow(MomentExpr::sin(v).unwrap(), take),
        };
        factors.push(f);
        order += take;
    }
    if factors.is_empty() {
        factors.push(MomentExpr::var(names[0].clone()));
    }
    MomentExpr::product(factors)
}

#[test]
fn correlated_expectations_agree_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = 0;
    for case in 0..25 {
        let n = rng.random_range(2..=3usize);
        let names: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
        let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let cov = random_psd(&mut rng, n, 0.8);
        let rv = RandomVectorSpec::new(
            Some(GaussianBlock {
                names: names.clone(),
                mean,
                cov,
            }),
            vec![("e0".into(), random_distribution(&mut rng))],
        )
        .unwrap();
        let mut all_names = names.clone();
        all_names.push("e0".into());
        let e = random_mtp_expr(&mut rng, &all_names);
        let exact = expectation(&e, &rv).unwrap();
        let est = mc_expectation(&e, &rv, 200_000, 5000 + case).unwrap();
        if (est.value - exact).abs() > 5.0 * est.std_error.max(1e-12) {
            eprintln!("case {case}: exact {exact} vs mc {} ± {}", est.value, est.std_error);
            failures += 1;
        }
    }
    assert!(failures == 0, "{failures} of 25 cases outside 5 sigma");
}

fn diff_drive_setup() -> (
    mkf::filters::StateSpaceModel,
    GaussianBelief,
    [f64; 2],
) {
    let cfg = DiffDriveConfig::with_standard_noise(0.5).unwrap();
    let map = LandmarkMap::new(vec![(1, 3.0, 1.0)]).unwrap();
    let noise = RangeBearingNoise::new(
        Distribution1D::exponential(1.0).unwrap(),
        Distribution1D::uniform(-0.3, 0.3).unwrap(),
    )
    .unwrap();
    let model = robot_model(&cfg, &map, 1, &noise).unwrap();
    let belief = GaussianBelief::new(
        vec![0.2, -0.1, 0.3],
        SymMatrix::from_rows(&[
            vec![0.09, 0.01, 0.00],
            vec![0.01, 0.09, 0.02],
            vec![0.00, 0.02, 0.60],
        ])
        .unwrap(),
    )
    .unwrap();
    (model, belief, [1.0, 0.2])
}

#[test]
fn mkf_one_step_moments_match_sampling() {
    let (model, belief, input) = diff_drive_setup();

    // prediction moments
    let fs = model.dynamics_with_inputs(&input).unwrap();
    let rv = RandomVectorSpec::new(
        Some(GaussianBlock {
            names: model.state_names.clone(),
            mean: belief.mean.clone(),
            cov: belief.cov.clone(),
        }),
        model.disturbance_laws.clone(),
    )
    .unwrap();
    let predicted = mkf_predict(&model, &belief, &input).unwrap();
    for (i, f) in fs.iter().enumerate() {
        let est = mc_expectation(f, &rv, 1_000_000, 40 + i as u64).unwrap();
        assert!(
            (est.value - predicted.mean[i]).abs() <= 5.0 * est.std_error,
            "predicted mean[{i}]: exact {} vs mc {} ± {}",
            predicted.mean[i],
            est.value,
            est.std_error
        );
    }

    // update moments over the predicted belief
    let rv_meas = RandomVectorSpec::new(
        Some(GaussianBlock {
            names: model.state_names.clone(),
            mean: predicted.mean.clone(),
            cov: predicted.cov.clone(),
        }),
        model.noise_laws.clone(),
    )
    .unwrap();
    let ex = Expander::new(&rv_meas).unwrap();
    let y_hat = ex.expectation_vector(&model.measurement).unwrap();
    for (j, h) in model.measurement.iter().enumerate() {
        let est = mc_expectation(h, &rv_meas, 1_000_000, 80 + j as u64).unwrap();
        assert!(
            (est.value - y_hat[j]).abs() <= 5.0 * est.std_error,
            "y_hat[{j}]: exact {} vs mc {} ± {}",
            y_hat[j],
            est.value,
            est.std_error
        );
    }
    // raw second and cross moments
    for i in 0..model.measurement.len() {
        for j in i..model.measurement.len() {
            let prod = MomentExpr::product(vec![
                model.measurement[i].clone(),
                model.measurement[j].clone(),
            ]);
            let exact = ex.expectation(&prod).unwrap();
            let est = mc_expectation(&prod, &rv_meas, 1_000_000, 120 + (i * 3 + j) as u64).unwrap();
            assert!(
                (est.value - exact).abs() <= 5.0 * est.std_error,
                "E[h{i} h{j}]: exact {exact} vs mc {} ± {}",
                est.value,
                est.std_error
            );
        }
    }
    for (i, name) in model.state_names.iter().enumerate() {
        for (j, h) in model.measurement.iter().enumerate() {
            let prod = MomentExpr::product(vec![MomentExpr::var(name.clone()), h.clone()]);
            let exact = ex.expectation(&prod).unwrap();
            let est = mc_expectation(&prod, &rv_meas, 1_000_000, 200 + (i * 2 + j) as u64).unwrap();
            assert!(
                (est.value - exact).abs() <= 5.0 * est.std_error,
                "E[x{i} h{j}]: exact {exact} vs mc {} ± {}",
                est.value,
                est.std_error
            );
        }
    }
}

#[test]
fn ekf_prediction_is_biased_under_large_heading_uncertainty() {
    // cov(th) = 0.6 >= 0.5: the first-order mean x + v cos(th̄) dt misses the
    // e^{-s/2} contraction, which Monte Carlo resolves at many sigma.
    let cfg = DiffDriveConfig::with_standard_noise(0.5).unwrap();
    let model = diff_drive_model(&cfg).unwrap();
    let belief = GaussianBelief::new(
        vec![0.0, 0.0, 0.0],
        SymMatrix::diag(&[0.01, 0.01, 0.6]),
    )
    .unwrap();
    let input = [1.0, 0.0];
    let fs = model.dynamics_with_inputs(&input).unwrap();
    let rv = RandomVectorSpec::new(
        Some(GaussianBlock {
            names: model.state_names.clone(),
            mean: belief.mean.clone(),
            cov: belief.cov.clone(),
        }),
        model.disturbance_laws.clone(),
    )
    .unwrap();
    let mc = mc_expectation(&fs[0], &rv, 1_000_000, 7).unwrap();

    let exact = mkf_predict(&model, &belief, &input).unwrap();
    assert!((exact.mean[0] - mc.value).abs() <= 5.0 * mc.std_error);

    let linearized = ekf_predict(&model, &belief, &input).unwrap();
    assert!(
        (linearized.mean[0] - mc.value).abs() > 5.0 * mc.std_error,
        "EKF mean {} vs MC {} ± {} should disagree",
        linearized.mean[0],
        mc.value,
        mc.std_error
    );
}

#[test]
fn jacobians_match_central_finite_differences() {
    let (model, _, _) = diff_drive_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let h = 1e-6;
    for _ in 0..25 {
        let state: Vec<f64> = vec![
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-3.0..3.0),
        ];
        let input = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let w = [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
        let v = [rng.random_range(0.5..1.5), rng.random_range(-0.3..0.3)];

        let a = model.eval_dfdx(&state, &input, &w);
        for j in 0..3 {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = model.eval_dynamics(&plus, &input, &w);
            let fm = model.eval_dynamics(&minus, &input, &w);
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((a[(i, j)] - fd).abs() <= 1e-5, "dfdx[{i}][{j}]");
            }
        }
        let hx = model.eval_dhdx(&state, &v);
        for j in 0..3 {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = model.eval_measurement(&plus, &v);
            let fm = model.eval_measurement(&minus, &v);
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((hx[(i, j)] - fd).abs() <= 1e-5, "dhdx[{i}][{j}]");
            }
        }
        let mv = model.eval_dhdv(&state, &v);
        for j in 0..2 {
            let mut plus = v;
            let mut minus = v;
            plus[j] += h;
            minus[j] -= h;
            let fp = model.eval_measurement(&state, &plus);
            let fm = model.eval_measurement(&state, &minus);
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((mv[(i, j)] - fd).abs() <= 1e-5, "dhdv[{i}][{j}]");
            }
        }
    }
}

#[test]
fn expansion_with_point_mass_reproduces_noiseless_rollout() {
    let cfg = DiffDriveConfig::noiseless(0.1).unwrap();
    let model = diff_drive_model(&cfg).unwrap();
    let inputs: Vec<Vec<f64>> = (0..20)
        .map(|k| vec![1.0, 0.3 * ((k as f64) * 0.2).sin()])
        .collect();
    let states = mkf::models::rollout(&model, &[0.0, 0.0, 0.0], &inputs, 0, 0).unwrap();

    let mut belief = GaussianBelief::new(vec![0.0, 0.0, 0.0], SymMatrix::zeros(3)).unwrap();
    for (k, input) in inputs.iter().enumerate() {
        belief = mkf_predict(&model, &belief, input).unwrap();
        for i in 0..3 {
            assert!(
                (belief.mean[i] - states[k + 1][i]).abs() <= 1e-12,
                "step {k} component {i}: {} vs {}",
                belief.mean[i],
                states[k + 1][i]
            );
        }
    }
}

#[test]
fn linear_expressions_propagate_means_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let names: Vec<String> = vec!["a".into(), "b".into()];
    let mean = vec![0.37, -1.42];
    let cov = random_psd(&mut rng, 2, 1.0);
    let rv = RandomVectorSpec::new(
        Some(GaussianBlock {
            names: names.clone(),
            mean: mean.clone(),
            cov,
        }),
        vec![],
    )
    .unwrap();
    let e = parse("2*a + 3*b - 1.5").unwrap();
    let got = expectation(&e, &rv).unwrap();
    let expected = 2.0 * mean[0] + 3.0 * mean[1] - 1.5;
    assert!((got - expected).abs() < 1e-13);
}

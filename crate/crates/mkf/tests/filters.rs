//! Cross-filter integration tests: linear-Gaussian reduction to the
//! classical Kalman filter, PSD preservation under randomized stepping, and
//! the diff-drive prediction examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mkf::dist::Distribution1D;
use mkf::expr::MomentExpr;
use mkf::filters::{
    ekf_predict, ekf_update, kf_predict, kf_update, mkf_predict, mkf_update, ukf_predict,
    ukf_update, GaussianBelief, StateSpaceModel, UkfParams,
};
use mkf::linalg::{eig_sym, Mat, SymMatrix};
use mkf::models::{diff_drive_model, DiffDriveConfig};

struct LinearModel {
    a: Mat,
    b: Mat,
    h: Mat,
    q: SymMatrix,
    r: SymMatrix,
    model: StateSpaceModel,
}

fn random_linear_model(rng: &mut ChaCha8Rng) -> LinearModel {
    let n = rng.random_range(2..=4usize);
    let m = rng.random_range(1..=3usize);
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = rng.random_range(-0.5..0.5) / n as f64;
        }
        a[(i, i)] += 0.7;
    }
    let mut b = Mat::zeros(n, 1);
    for i in 0..n {
        b[(i, 0)] = rng.random_range(-0.5..0.5);
    }
    let mut h = Mat::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            h[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let q_diag: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.3)).collect();
    let r_diag: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.4)).collect();

    let state_names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let var = |name: &str| MomentExpr::var(name);
    let dynamics: Vec<MomentExpr> = (0..n)
        .map(|i| {
            let mut terms: Vec<MomentExpr> = (0..n)
                .map(|j| {
                    MomentExpr::product(vec![
                        MomentExpr::Constant(a[(i, j)]),
                        var(&state_names[j]),
                    ])
                })
                .collect();
            terms.push(MomentExpr::product(vec![
                MomentExpr::Constant(b[(i, 0)]),
                var("u"),
            ]));
            terms.push(var(&format!("w{i}")));
            MomentExpr::sum(terms)
        })
        .collect();
    let measurement: Vec<MomentExpr> = (0..m)
        .map(|i| {
            let mut terms: Vec<MomentExpr> = (0..n)
                .map(|j| {
                    MomentExpr::product(vec![
                        MomentExpr::Constant(h[(i, j)]),
                        var(&state_names[j]),
                    ])
                })
                .collect();
            terms.push(var(&format!("n{i}")));
            MomentExpr::sum(terms)
        })
        .collect();
    let model = StateSpaceModel::new(
        state_names,
        vec!["u".into()],
        dynamics,
        (0..n)
            .map(|i| {
                (
                    format!("w{i}"),
                    Distribution1D::gaussian(0.0, q_diag[i]).unwrap(),
                )
            })
            .collect(),
        measurement,
        (0..m)
            .map(|i| {
                (
                    format!("n{i}"),
                    Distribution1D::gaussian(0.0, r_diag[i]).unwrap(),
                )
            })
            .collect(),
    )
    .unwrap();
    LinearModel {
        a,
        b,
        h,
        q: SymMatrix::diag(&q_diag),
        r: SymMatrix::diag(&r_diag),
        model,
    }
}

fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> GaussianBelief {
    let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = rng.random_range(-0.5..0.5);
        }
    }
    let spd = m.matmul(&m.transpose());
    let cov = SymMatrix::from_fn(n, |i, j| spd[(i, j)] + if i == j { 0.1 } else { 0.0 });
    GaussianBelief::new(mean, cov).unwrap()
}

fn assert_close(label: &str, a: &GaussianBelief, b: &GaussianBelief, tol: f64) {
    for (i, (x, y)) in a.mean.iter().zip(&b.mean).enumerate() {
        assert!(
            (x - y).abs() <= tol,
            "{label}: mean[{i}] differs: {x} vs {y}"
        );
    }
    for i in 0..a.cov.dim() {
        for j in 0..a.cov.dim() {
            let (x, y) = (a.cov.get(i, j), b.cov.get(i, j));
            assert!(
                (x - y).abs() <= tol,
                "{label}: cov[{i}][{j}] differs: {x} vs {y}"
            );
        }
    }
}

#[test]
fn linear_models_reduce_to_classical_kf() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..10 {
        let lm = random_linear_model(&mut rng);
        let n = lm.model.state_dim();
        let m = lm.model.measurement_dim();
        let initial = random_belief(&mut rng, n);
        let mut kf_belief = initial.clone();
        let mut mkf_belief = initial.clone();
        let mut ekf_belief = initial.clone();
        let mut ukf_belief = initial.clone();
        let params = UkfParams::default();
        for step in 0..50 {
            let input = [rng.random_range(-1.0..1.0)];
            let z: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();

            let kf_pred = kf_predict(&lm.a, &lm.b, &lm.q, &kf_belief, &input).unwrap();
            let (kf_next, _) = kf_update(&lm.h, &lm.r, &kf_pred, &z).unwrap();
            let mkf_pred = mkf_predict(&lm.model, &mkf_belief, &input).unwrap();
            let (mkf_next, _) = mkf_update(&lm.model, &mkf_pred, &z).unwrap();
            let ekf_pred = ekf_predict(&lm.model, &ekf_belief, &input).unwrap();
            let (ekf_next, _) = ekf_update(&lm.model, &ekf_pred, &z).unwrap();
            let ukf_pred = ukf_predict(&lm.model, &ukf_belief, &input, &params).unwrap();
            let (ukf_next, _) = ukf_update(&lm.model, &ukf_pred, &z, &params).unwrap();

            let tag = format!("trial {trial} step {step}");
            assert_close(&format!("{tag} mkf"), &mkf_next, &kf_next, 1e-9);
            assert_close(&format!("{tag} ekf"), &ekf_next, &kf_next, 1e-9);
            assert_close(&format!("{tag} ukf"), &ukf_next, &kf_next, 1e-9);

            kf_belief = kf_next;
            mkf_belief = mkf_next;
            ekf_belief = ekf_next;
            ukf_belief = ukf_next;
        }
    }
}

#[test]
fn randomized_steps_preserve_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0usize;

    // linear models: cheap, covers most of the budget
    for _ in 0..80 {
        let lm = random_linear_model(&mut rng);
        let m = lm.model.measurement_dim();
        let mut belief = random_belief(&mut rng, lm.model.state_dim());
        for _ in 0..100 {
            let input = [rng.random_range(-1.0..1.0)];
            let z: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let pred = mkf_predict(&lm.model, &belief, &input).unwrap();
            let (next, _) = mkf_update(&lm.model, &pred, &z).unwrap();
            belief = next;
            checked += 1;
        }
    }

    // diff-drive with range-bearing updates
    let cfg = DiffDriveConfig::with_standard_noise(0.1).unwrap();
    let map = mkf::models::LandmarkMap::new(vec![(1, 2.0, 1.0)]).unwrap();
    let noise = mkf::models::RangeBearingNoise::new(
        Distribution1D::gaussian(1.0, 0.01).unwrap(),
        Distribution1D::gaussian(0.0, 0.0007).unwrap(),
    )
    .unwrap();
    let robot = mkf::models::robot_model(&cfg, &map, 1, &noise).unwrap();
    for trial in 0..20 {
        let mut belief = GaussianBelief::new(
            vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.5..1.5),
            ],
            SymMatrix::diag(&[0.05, 0.05, 0.1]),
        )
        .unwrap();
        for step in 0..100 {
            let input = [rng.random_range(0.0..1.0), rng.random_range(-0.5..0.5)];
            let pred = mkf_predict(&robot, &belief, &input).unwrap();
            let zx = rng.random_range(-3.0..3.0);
            let zy = rng.random_range(-3.0..3.0);
            let (next, _) = mkf_update(&robot, &pred, &[zx, zy])
                .unwrap_or_else(|e| panic!("trial {trial} step {step}: {e}"));
            belief = next;
            checked += 1;
        }
    }

    assert!(checked >= 10_000, "only {checked} steps exercised");
}

#[test]
fn final_beliefs_have_nonnegative_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lm = random_linear_model(&mut rng);
    let mut belief = random_belief(&mut rng, lm.model.state_dim());
    for _ in 0..200 {
        let input = [rng.random_range(-1.0..1.0)];
        let z: Vec<f64> = (0..lm.model.measurement_dim())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let pred = mkf_predict(&lm.model, &belief, &input).unwrap();
        let (next, _) = mkf_update(&lm.model, &pred, &z).unwrap();
        belief = next;
        let dec = eig_sym(&belief.cov).unwrap();
        assert!(dec.lambdas.iter().all(|l| *l >= -1e-9));
    }
}

#[test]
fn diff_drive_point_mass_prediction_is_deterministic() {
    let cfg = DiffDriveConfig::noiseless(0.1).unwrap();
    let model = diff_drive_model(&cfg).unwrap();
    let belief = GaussianBelief::new(vec![0.0, 0.0, 0.0], SymMatrix::zeros(3)).unwrap();
    let pred = mkf_predict(&model, &belief, &[1.0, 0.0]).unwrap();
    assert!((pred.mean[0] - 0.1).abs() < 1e-14);
    assert!(pred.mean[1].abs() < 1e-14);
    assert!(pred.mean[2].abs() < 1e-14);
    assert!(pred.cov.max_abs() < 1e-12);
}

#[test]
fn diff_drive_heading_uncertainty_contracts_the_mean() {
    // with th ~ N(0, s) and unit speed for one second, E[x'] = E[cos th] = e^{-s/2}
    let s = 0.5;
    let cfg = DiffDriveConfig::noiseless(1.0).unwrap();
    let model = diff_drive_model(&cfg).unwrap();
    let belief =
        GaussianBelief::new(vec![0.0, 0.0, 0.0], SymMatrix::diag(&[0.0, 0.0, s])).unwrap();
    let pred = mkf_predict(&model, &belief, &[1.0, 0.0]).unwrap();
    let expected = (-s / 2.0f64).exp();
    assert!(
        (pred.mean[0] - expected).abs() < 1e-12,
        "{} vs {expected}",
        pred.mean[0]
    );
}

#[test]
fn zero_innovation_keeps_mean_but_shrinks_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lm = random_linear_model(&mut rng);
    let belief = random_belief(&mut rng, lm.model.state_dim());
    let pred = mkf_predict(&lm.model, &belief, &[0.3]).unwrap();

    // feed the predicted measurement back as the observation
    let rv = mkf::expand::RandomVectorSpec::new(
        Some(mkf::expand::GaussianBlock {
            names: lm.model.state_names.clone(),
            mean: pred.mean.clone(),
            cov: pred.cov.clone(),
        }),
        lm.model.noise_laws.clone(),
    )
    .unwrap();
    let y_hat = mkf::expand::expectation_vector(&lm.model.measurement, &rv).unwrap();
    let (updated, record) = mkf_update(&lm.model, &pred, &y_hat).unwrap();
    for (a, b) in updated.mean.iter().zip(&pred.mean) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(record.innovation.iter().all(|v| v.abs() < 1e-12));
    assert!(updated.cov.trace() <= pred.cov.trace() + 1e-9);
    assert!(updated.cov.trace() < pred.cov.trace() - 1e-6);
}

#[test]
fn update_never_inflates_total_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let lm = random_linear_model(&mut rng);
        let belief = random_belief(&mut rng, lm.model.state_dim());
        let pred = mkf_predict(&lm.model, &belief, &[0.0]).unwrap();
        let z: Vec<f64> = (0..lm.model.measurement_dim())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let (updated, _) = mkf_update(&lm.model, &pred, &z).unwrap();
        assert!(updated.cov.trace() <= pred.cov.trace() + 1e-9);
    }
}

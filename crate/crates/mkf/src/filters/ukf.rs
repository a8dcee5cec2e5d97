//! Unscented Kalman filter baseline: scaled unscented transform over the
//! state augmented with the disturbance block (prediction) or the noise block
//! (update), so non-additive noise flows through the full nonlinearity.
//! Non-Gaussian laws are represented by their mean and variance in the
//! augmented Gaussian — a deliberate handicap relative to the exact filter.

use crate::error::{Error, Result};
use crate::expand::RandomVectorSpec;
use crate::expr::{CompiledExpr, MomentExpr};
use crate::filters::mkf::finish_update;
use crate::filters::{block_diag, GaussianBelief, StateSpaceModel, StepRecord};
use crate::linalg::{eig_sym, Mat, SymMatrix};

/// Scaled unscented transform parameters.
#[derive(Clone, Copy, Debug)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        UkfParams {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

/// Deterministic sigma-point set matching a mean and covariance.
#[derive(Clone, Debug)]
pub struct SigmaPoints {
    pub points: Vec<Vec<f64>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

/// 2L+1 scaled sigma points. The covariance square root comes from the
/// symmetric eigendecomposition so positive semidefinite (including singular)
/// covariances are handled; genuinely negative eigenvalues are an error.
pub fn sigma_points(mean: &[f64], cov: &SymMatrix, params: &UkfParams) -> Result<SigmaPoints> {
    let l = mean.len();
    if cov.dim() != l {
        return Err(Error::DimensionMismatch(format!(
            "mean has {l} entries but covariance is {}x{}",
            cov.dim(),
            cov.dim()
        )));
    }
    let lf = l as f64;
    let lambda = params.alpha * params.alpha * (lf + params.kappa) - lf;
    let scale = lf + lambda;
    if scale <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "unscented scaling L + lambda must be positive, got {scale}"
        )));
    }
    let dec = eig_sym(cov)?;
    let tol = dec
        .lambdas
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1.0)
        * 1e-9;
    for lam in &dec.lambdas {
        if *lam < -tol {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: *lam });
        }
    }

    let mut points = Vec::with_capacity(2 * l + 1);
    points.push(mean.to_vec());
    for j in 0..l {
        let step = (scale * dec.lambdas[j].max(0.0)).sqrt();
        let mut plus = mean.to_vec();
        let mut minus = mean.to_vec();
        for i in 0..l {
            let delta = step * dec.transform[(i, j)];
            plus[i] += delta;
            minus[i] -= delta;
        }
        points.push(plus);
        points.push(minus);
    }

    let w = 1.0 / (2.0 * scale);
    let mut mean_weights = vec![w; 2 * l + 1];
    let mut cov_weights = vec![w; 2 * l + 1];
    mean_weights[0] = lambda / scale;
    cov_weights[0] = lambda / scale + (1.0 - params.alpha * params.alpha + params.beta);
    Ok(SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    })
}

fn weighted_mean(points: &[Vec<f64>], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for (p, w) in points.iter().zip(weights) {
        for i in 0..dim {
            mean[i] += w * p[i];
        }
    }
    mean
}

fn weighted_cov(
    a: &[Vec<f64>],
    a_mean: &[f64],
    b: &[Vec<f64>],
    b_mean: &[f64],
    weights: &[f64],
) -> Mat {
    let mut out = Mat::zeros(a_mean.len(), b_mean.len());
    for ((pa, pb), w) in a.iter().zip(b).zip(weights) {
        for i in 0..a_mean.len() {
            let da = pa[i] - a_mean[i];
            if da == 0.0 {
                continue;
            }
            for j in 0..b_mean.len() {
                out[(i, j)] += w * da * (pb[j] - b_mean[j]);
            }
        }
    }
    out
}

pub fn ukf_predict(
    model: &StateSpaceModel,
    belief: &GaussianBelief,
    input: &[f64],
    params: &UkfParams,
) -> Result<GaussianBelief> {
    let n = model.state_dim();
    let mut aug_mean = belief.mean.clone();
    aug_mean.extend(model.disturbance_means());
    let aug_cov = block_diag(&belief.cov, &model.disturbance_variances());
    let sigma = sigma_points(&aug_mean, &aug_cov, params)?;
    let propagated: Vec<Vec<f64>> = sigma
        .points
        .iter()
        .map(|p| model.eval_dynamics(&p[..n], input, &p[n..]))
        .collect();
    let mean = weighted_mean(&propagated, &sigma.mean_weights, n);
    let cov = weighted_cov(&propagated, &mean, &propagated, &mean, &sigma.cov_weights);
    GaussianBelief::new(mean, SymMatrix::symmetrized(&cov))
}

pub fn ukf_update(
    model: &StateSpaceModel,
    predicted: &GaussianBelief,
    z: &[f64],
    params: &UkfParams,
) -> Result<(GaussianBelief, StepRecord)> {
    let n = model.state_dim();
    let m = model.measurement_dim();
    if z.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "measurement has {} entries, model expects {m}",
            z.len()
        )));
    }
    let mut aug_mean = predicted.mean.clone();
    aug_mean.extend(model.noise_means());
    let aug_cov = block_diag(&predicted.cov, &model.noise_variances());
    let sigma = sigma_points(&aug_mean, &aug_cov, params)?;
    let state_points: Vec<Vec<f64>> = sigma.points.iter().map(|p| p[..n].to_vec()).collect();
    let meas_points: Vec<Vec<f64>> = sigma
        .points
        .iter()
        .map(|p| model.eval_measurement(&p[..n], &p[n..]))
        .collect();
    let y_hat = weighted_mean(&meas_points, &sigma.mean_weights, m);
    let sigma_yy = SymMatrix::symmetrized(&weighted_cov(
        &meas_points,
        &y_hat,
        &meas_points,
        &y_hat,
        &sigma.cov_weights,
    ));
    let sigma_xy = weighted_cov(
        &state_points,
        &predicted.mean,
        &meas_points,
        &y_hat,
        &sigma.cov_weights,
    );
    finish_update(predicted, &y_hat, &sigma_yy, &sigma_xy, z)
}

pub fn ukf_step(
    model: &StateSpaceModel,
    belief: &GaussianBelief,
    input: &[f64],
    z: &[f64],
    params: &UkfParams,
) -> Result<(GaussianBelief, StepRecord)> {
    let predicted = ukf_predict(model, belief, input, params)?;
    ukf_update(model, &predicted, z, params)
}

/// Unscented-transform estimates of E[e] for each expression over a random
/// vector, with independent non-Gaussian blocks replaced by mean/variance
/// Gaussian surrogates. This is the "UT" comparison column.
pub fn unscented_expectation(
    es: &[MomentExpr],
    rv: &RandomVectorSpec,
    params: &UkfParams,
) -> Result<Vec<f64>> {
    let mut order: Vec<String> = Vec::new();
    let mut mean: Vec<f64> = Vec::new();
    let (base_cov, extra): (SymMatrix, Vec<f64>) = match rv.gaussian_block() {
        Some(block) => {
            order.extend(block.names.iter().cloned());
            mean.extend(block.mean.iter().copied());
            let extra = rv
                .independent_vars()
                .iter()
                .map(|(n, d)| {
                    order.push(n.clone());
                    mean.push(d.mean());
                    d.variance()
                })
                .collect();
            (block.cov.clone(), extra)
        }
        None => {
            let extra = rv
                .independent_vars()
                .iter()
                .map(|(n, d)| {
                    order.push(n.clone());
                    mean.push(d.mean());
                    d.variance()
                })
                .collect();
            (SymMatrix::zeros(0), extra)
        }
    };
    let cov = block_diag(&base_cov, &extra);
    let sigma = sigma_points(&mean, &cov, params)?;
    let mut out = Vec::with_capacity(es.len());
    for e in es {
        let compiled = CompiledExpr::compile(e, &order)?;
        let value = sigma
            .points
            .iter()
            .zip(&sigma.mean_weights)
            .map(|(p, w)| w * compiled.eval(p))
            .sum();
        out.push(value);
    }
    Ok(out)
}

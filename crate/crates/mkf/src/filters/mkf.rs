//! Moment-based filtering: the predict and update steps propagate exact
//! first and second moments of the model functions over the current Gaussian
//! belief joined with the independent disturbance/noise blocks, then
//! re-approximate the result by a Gaussian.

use crate::error::{Error, Result};
use crate::expand::{Expander, GaussianBlock, RandomVectorSpec};
use crate::expr::MomentExpr;
use crate::filters::{GaussianBelief, StateSpaceModel, StepRecord};
use crate::linalg::{solve_spd, Mat, SymMatrix};

fn belief_rv(
    model_names: &[String],
    belief: &GaussianBelief,
    independent: &[(String, crate::dist::Distribution1D)],
) -> Result<RandomVectorSpec> {
    RandomVectorSpec::new(
        Some(GaussianBlock {
            names: model_names.to_vec(),
            mean: belief.mean.clone(),
            cov: belief.cov.clone(),
        }),
        independent.to_vec(),
    )
}

/// Prediction: x̂' = E[f(x, u, w)] and Σ' = E[f fᵀ] - x̂'x̂'ᵀ, computed exactly
/// over the belief (as a correlated Gaussian block) and the disturbance laws.
pub fn mkf_predict(
    model: &StateSpaceModel,
    belief: &GaussianBelief,
    input: &[f64],
) -> Result<GaussianBelief> {
    if belief.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "belief dimension {} does not match state dimension {}",
            belief.dim(),
            model.state_dim()
        )));
    }
    let fs = model.dynamics_with_inputs(input)?;
    if fs.is_empty() {
        return Err(Error::InvalidSpec("model has no dynamics".into()));
    }
    let rv = belief_rv(&model.state_names, belief, &model.disturbance_laws)?;
    let ex = Expander::new(&rv)?;
    let mean = ex.expectation_vector(&fs)?;
    let second = ex.second_moment_matrix(&fs)?;
    let n = mean.len();
    let cov = SymMatrix::from_fn(n, |i, j| second.get(i, j) - mean[i] * mean[j]);
    GaussianBelief::new(mean, cov)
}

/// Measurement update with exact predicted-measurement and cross moments:
/// ŷ = E[h], Σ_yy = E[h hᵀ] - ŷŷᵀ, Σ_xy = E[x hᵀ] - x̂ŷᵀ, K = Σ_xy Σ_yy⁻¹.
pub fn mkf_update(
    model: &StateSpaceModel,
    predicted: &GaussianBelief,
    z: &[f64],
) -> Result<(GaussianBelief, StepRecord)> {
    let hs = &model.measurement;
    if hs.is_empty() {
        return Err(Error::InvalidSpec("model has no measurement".into()));
    }
    if z.len() != hs.len() {
        return Err(Error::DimensionMismatch(format!(
            "measurement has {} entries, model expects {}",
            z.len(),
            hs.len()
        )));
    }
    let rv = belief_rv(&model.state_names, predicted, &model.noise_laws)?;
    let ex = Expander::new(&rv)?;

    let y_hat = ex.expectation_vector(hs)?;
    let m = y_hat.len();
    let second_yy = ex.second_moment_matrix(hs)?;
    let sigma_yy = SymMatrix::from_fn(m, |i, j| second_yy.get(i, j) - y_hat[i] * y_hat[j]);

    let state_exprs: Vec<MomentExpr> = model
        .state_names
        .iter()
        .map(|n| MomentExpr::var(n.clone()))
        .collect();
    let raw_xy = ex.cross_moment_matrix(&state_exprs, hs)?;
    let n = predicted.dim();
    let mut sigma_xy = Mat::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            sigma_xy[(i, j)] = raw_xy[(i, j)] - predicted.mean[i] * y_hat[j];
        }
    }

    finish_update(predicted, &y_hat, &sigma_yy, &sigma_xy, z)
}

/// Shared gain/update arithmetic: K = Σ_xy Σ_yy⁻¹ through an SPD solve on the
/// transposed system, mean correction by the innovation, and the covariance
/// downdate Σ - K Σ_yy Kᵀ.
pub(crate) fn finish_update(
    predicted: &GaussianBelief,
    y_hat: &[f64],
    sigma_yy: &SymMatrix,
    sigma_xy: &Mat,
    z: &[f64],
) -> Result<(GaussianBelief, StepRecord)> {
    let gain_t = solve_spd(sigma_yy, &sigma_xy.transpose()).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::NotPositiveDefinite {
            context: "measurement covariance",
        },
        other => other,
    })?;
    let gain = gain_t.transpose();
    let innovation: Vec<f64> = z.iter().zip(y_hat).map(|(zi, yi)| zi - yi).collect();
    let correction = gain.mul_vec(&innovation);
    let mean: Vec<f64> = predicted
        .mean
        .iter()
        .zip(&correction)
        .map(|(m, c)| m + c)
        .collect();
    let downdate = gain.matmul(&sigma_yy.to_mat()).matmul(&gain.transpose());
    let cov = predicted.cov.to_mat().sub(&downdate);
    let updated = GaussianBelief::new(mean, SymMatrix::symmetrized(&cov))?;
    let record = StepRecord {
        predicted: predicted.clone(),
        predicted_measurement: y_hat.to_vec(),
        innovation,
        gain,
        updated: updated.clone(),
    };
    Ok((updated, record))
}

/// One full predict-then-update step.
pub fn mkf_step(
    model: &StateSpaceModel,
    belief: &GaussianBelief,
    input: &[f64],
    z: &[f64],
) -> Result<(GaussianBelief, StepRecord)> {
    let predicted = mkf_predict(model, belief, input)?;
    mkf_update(model, &predicted, z)
}

//! Extended Kalman filter baseline: first-order linearization at the mean,
//! with non-additive noise handled through the noise Jacobians
//! (Q_eff = (∂f/∂w) Q (∂f/∂w)ᵀ, R_eff = (∂h/∂v) R (∂h/∂v)ᵀ). Non-Gaussian
//! laws enter through their mean and variance only.

use crate::error::Result;
use crate::filters::mkf::finish_update;
use crate::filters::{GaussianBelief, StateSpaceModel, StepRecord};
use crate::linalg::{Mat, SymMatrix};

fn scaled_outer(l: &Mat, diag: &[f64]) -> Mat {
    // L diag(q) Lᵀ
    let mut scaled = l.clone();
    for i in 0..scaled.rows() {
        for j in 0..scaled.cols() {
            scaled[(i, j)] *= diag[j];
        }
    }
    scaled.matmul(&l.transpose())
}

pub fn ekf_predict(
    model: &StateSpaceModel,
    belief: &GaussianBelief,
    input: &[f64],
) -> Result<GaussianBelief> {
    let w_mean = model.disturbance_means();
    let mean = model.eval_dynamics(&belief.mean, input, &w_mean);
    let a = model.eval_dfdx(&belief.mean, input, &w_mean);
    let l = model.eval_dfdw(&belief.mean, input, &w_mean);
    let q = model.disturbance_variances();
    let mut cov = a.matmul(&belief.cov.to_mat()).matmul(&a.transpose());
    if !q.is_empty() {
        cov = cov.add(&scaled_outer(&l, &q));
    }
    GaussianBelief::new(mean, SymMatrix::symmetrized(&cov))
}

pub fn ekf_update(
    model: &StateSpaceModel,
    predicted: &GaussianBelief,
    z: &[f64],
) -> Result<(GaussianBelief, StepRecord)> {
    let v_mean = model.noise_means();
    let y_hat = model.eval_measurement(&predicted.mean, &v_mean);
    let h = model.eval_dhdx(&predicted.mean, &v_mean);
    let m_jac = model.eval_dhdv(&predicted.mean, &v_mean);
    let r = model.noise_variances();
    let mut s = h.matmul(&predicted.cov.to_mat()).matmul(&h.transpose());
    if !r.is_empty() {
        s = s.add(&scaled_outer(&m_jac, &r));
    }
    let sigma_yy = SymMatrix::symmetrized(&s);
    let sigma_xy = predicted.cov.to_mat().matmul(&h.transpose());
    finish_update(predicted, &y_hat, &sigma_yy, &sigma_xy, z)
}

pub fn ekf_step(
    model: &StateSpaceModel,
    belief: &GaussianBelief,
    input: &[f64],
    z: &[f64],
) -> Result<(GaussianBelief, StepRecord)> {
    let predicted = ekf_predict(model, belief, input)?;
    ekf_update(model, &predicted, z)
}

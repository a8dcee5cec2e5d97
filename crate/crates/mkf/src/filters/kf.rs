//! Textbook linear Kalman filter, used as the reduction oracle for the
//! nonlinear filters on linear-Gaussian models.

use crate::error::{Error, Result};
use crate::filters::mkf::finish_update;
use crate::filters::{GaussianBelief, StepRecord};
use crate::linalg::{Mat, SymMatrix};

/// x' = A x + B u + w, w ~ N(0, Q).
pub fn kf_predict(
    a: &Mat,
    b: &Mat,
    q: &SymMatrix,
    belief: &GaussianBelief,
    input: &[f64],
) -> Result<GaussianBelief> {
    if a.rows() != belief.dim() || a.cols() != belief.dim() {
        return Err(Error::DimensionMismatch("A does not match state".into()));
    }
    let mut mean = a.mul_vec(&belief.mean);
    if b.cols() > 0 {
        let bu = b.mul_vec(input);
        for (m, c) in mean.iter_mut().zip(&bu) {
            *m += c;
        }
    }
    let cov = a
        .matmul(&belief.cov.to_mat())
        .matmul(&a.transpose())
        .add(&q.to_mat());
    GaussianBelief::new(mean, SymMatrix::symmetrized(&cov))
}

/// y = H x + v, v ~ N(0, R).
pub fn kf_update(
    h: &Mat,
    r: &SymMatrix,
    predicted: &GaussianBelief,
    z: &[f64],
) -> Result<(GaussianBelief, StepRecord)> {
    let y_hat = h.mul_vec(&predicted.mean);
    let s = h
        .matmul(&predicted.cov.to_mat())
        .matmul(&h.transpose())
        .add(&r.to_mat());
    let sigma_yy = SymMatrix::symmetrized(&s);
    let sigma_xy = predicted.cov.to_mat().matmul(&h.transpose());
    finish_update(predicted, &y_hat, &sigma_yy, &sigma_xy, z)
}

/// One classical predict-then-update step.
#[allow(clippy::too_many_arguments)]
pub fn kf_step(
    a: &Mat,
    b: &Mat,
    h: &Mat,
    q: &SymMatrix,
    r: &SymMatrix,
    belief: &GaussianBelief,
    input: &[f64],
    z: &[f64],
) -> Result<GaussianBelief> {
    let predicted = kf_predict(a, b, q, belief, input)?;
    let (updated, _) = kf_update(h, r, &predicted, z)?;
    Ok(updated)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_measurement_collapses_to_observation() {
        // identity dynamics and measurement, R -> 0
        let a = Mat::identity(2);
        let b = Mat::zeros(2, 0);
        let h = Mat::identity(2);
        let q = SymMatrix::diag(&[1e-12, 1e-12]);
        let r = SymMatrix::diag(&[1e-12, 1e-12]);
        let belief = GaussianBelief::new(vec![0.0, 0.0], SymMatrix::identity(2)).unwrap();
        let z = [3.0, -1.0];
        let updated = kf_step(&a, &b, &h, &q, &r, &belief, &[], &z).unwrap();
        assert!((updated.mean[0] - 3.0).abs() < 1e-6);
        assert!((updated.mean[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_riccati_fixed_point() {
        // x' = a x + w, y = x + v; stationary prior variance p solves
        // p = a² p (1 - p/(p+r)) + q, iterated to convergence as the oracle.
        let (a_coef, q_var, r_var) = (0.9, 0.2, 0.5);
        let mut p_oracle = 1.0;
        for _ in 0..500 {
            let p_post = p_oracle - p_oracle * p_oracle / (p_oracle + r_var);
            p_oracle = a_coef * a_coef * p_post + q_var;
        }

        let a = Mat::from_rows(&[vec![a_coef]]).unwrap();
        let b = Mat::zeros(1, 0);
        let h = Mat::identity(1);
        let q = SymMatrix::diag(&[q_var]);
        let r = SymMatrix::diag(&[r_var]);
        let mut belief = GaussianBelief::new(vec![0.0], SymMatrix::diag(&[1.0])).unwrap();
        for _ in 0..500 {
            let predicted = kf_predict(&a, &b, &q, &belief, &[]).unwrap();
            let (updated, _) = kf_update(&h, &r, &predicted, &[0.0]).unwrap();
            belief = updated;
        }
        let predicted = kf_predict(&a, &b, &q, &belief, &[]).unwrap();
        assert!(
            (predicted.cov.get(0, 0) - p_oracle).abs() < 1e-9,
            "stationary variance {} vs oracle {p_oracle}",
            predicted.cov.get(0, 0)
        );
    }
}

//! Nonlinear Kalman filtering behind a common predict/update interface: the
//! moment-based filter (exact first and second moments through the model via
//! [`crate::expand`]), and EKF/UKF/linear-KF baselines.
//!
//! All filters carry a [`GaussianBelief`] and re-approximate the posterior by
//! its first two moments after every step. Covariances are symmetrized and
//! projected back onto the PSD cone after each subtraction step; eigenvalues
//! below `-1e-9` (relative) are an error rather than silently repaired.
//!
//! The per-step cost of the moment-based filter is dominated by the
//! eigendecompositions used for whitening, O(n³) in the state dimension —
//! the same order as the EKF and UKF linear-algebra steps.

mod ekf;
mod kf;
mod mkf;
mod ukf;

pub use ekf::{ekf_predict, ekf_step, ekf_update};
pub use kf::{kf_predict, kf_step, kf_update};
pub use mkf::{mkf_predict, mkf_step, mkf_update};
pub use ukf::{
    sigma_points, ukf_predict, ukf_step, ukf_update, unscented_expectation, SigmaPoints,
    UkfParams,
};

use std::collections::BTreeSet;

use crate::dist::Distribution1D;
use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, MomentExpr};
use crate::linalg::{psd_project, Mat, SymMatrix};

/// Relative eigenvalue tolerance for covariance repair inside the filters.
pub const PSD_REPAIR_TOL: f64 = 1e-9;

/// Gaussian summary of the state distribution: mean and PSD covariance.
#[derive(Clone, Debug)]
pub struct GaussianBelief {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

impl GaussianBelief {
    /// Validates dimensions and repairs floating-point PSD violations (small
    /// negative eigenvalues clamp to zero, larger ones are an error).
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch(format!(
                "belief mean has {} entries, covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec("non-finite belief mean".into()));
        }
        let cov = psd_project(&cov, PSD_REPAIR_TOL)?;
        Ok(GaussianBelief { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|m| m.is_finite()) && self.cov.is_finite()
    }
}

/// One filter update, kept for inspection: the prior, predicted measurement,
/// innovation, gain, and posterior.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub predicted: GaussianBelief,
    pub predicted_measurement: Vec<f64>,
    pub innovation: Vec<f64>,
    pub gain: Mat,
    pub updated: GaussianBelief,
}

/// Discrete-time stochastic model x' = f(x, u, w), y = h(x, v), with f and h
/// given as mixed-trigonometric-polynomial expressions. Jacobians are derived
/// symbolically at construction, and all expressions are compiled against
/// fixed variable orderings for fast pointwise evaluation.
#[derive(Clone, Debug)]
pub struct StateSpaceModel {
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub dynamics: Vec<MomentExpr>,
    pub disturbance_laws: Vec<(String, Distribution1D)>,
    pub measurement: Vec<MomentExpr>,
    pub noise_laws: Vec<(String, Distribution1D)>,
    dyn_order: Vec<String>,
    meas_order: Vec<String>,
    compiled_dynamics: Vec<CompiledExpr>,
    compiled_measurement: Vec<CompiledExpr>,
    dfdx: Vec<Vec<CompiledExpr>>,
    dfdw: Vec<Vec<CompiledExpr>>,
    dhdx: Vec<Vec<CompiledExpr>>,
    dhdv: Vec<Vec<CompiledExpr>>,
}

impl StateSpaceModel {
    pub fn new(
        state_names: Vec<String>,
        input_names: Vec<String>,
        dynamics: Vec<MomentExpr>,
        disturbance_laws: Vec<(String, Distribution1D)>,
        measurement: Vec<MomentExpr>,
        noise_laws: Vec<(String, Distribution1D)>,
    ) -> Result<Self> {
        if !dynamics.is_empty() && dynamics.len() != state_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} dynamics expressions for {} states",
                dynamics.len(),
                state_names.len()
            )));
        }
        let mut all_names = BTreeSet::new();
        for name in state_names
            .iter()
            .chain(input_names.iter())
            .chain(disturbance_laws.iter().map(|(n, _)| n))
            .chain(noise_laws.iter().map(|(n, _)| n))
        {
            if !all_names.insert(name.clone()) {
                return Err(Error::InvalidSpec(format!(
                    "name `{name}` appears in more than one role"
                )));
            }
        }

        let dyn_order: Vec<String> = state_names
            .iter()
            .chain(input_names.iter())
            .chain(disturbance_laws.iter().map(|(n, _)| n))
            .cloned()
            .collect();
        let meas_order: Vec<String> = state_names
            .iter()
            .chain(noise_laws.iter().map(|(n, _)| n))
            .cloned()
            .collect();

        for e in &dynamics {
            for v in e.vars() {
                if !dyn_order.contains(&v) {
                    return Err(Error::UnknownVariable(v));
                }
            }
        }
        for e in &measurement {
            for v in e.vars() {
                if !meas_order.contains(&v) {
                    return Err(Error::UnknownVariable(v));
                }
            }
        }

        let compile_all = |es: &[MomentExpr], order: &[String]| -> Result<Vec<CompiledExpr>> {
            es.iter().map(|e| CompiledExpr::compile(e, order)).collect()
        };
        let jacobian = |es: &[MomentExpr],
                        wrt: &[String],
                        order: &[String]|
         -> Result<Vec<Vec<CompiledExpr>>> {
            es.iter()
                .map(|e| {
                    wrt.iter()
                        .map(|v| CompiledExpr::compile(&e.differentiate(v), order))
                        .collect()
                })
                .collect()
        };
        let disturbance_names: Vec<String> =
            disturbance_laws.iter().map(|(n, _)| n.clone()).collect();
        let noise_names: Vec<String> = noise_laws.iter().map(|(n, _)| n.clone()).collect();

        let compiled_dynamics = compile_all(&dynamics, &dyn_order)?;
        let compiled_measurement = compile_all(&measurement, &meas_order)?;
        let dfdx = jacobian(&dynamics, &state_names, &dyn_order)?;
        let dfdw = jacobian(&dynamics, &disturbance_names, &dyn_order)?;
        let dhdx = jacobian(&measurement, &state_names, &meas_order)?;
        let dhdv = jacobian(&measurement, &noise_names, &meas_order)?;

        Ok(StateSpaceModel {
            state_names,
            input_names,
            dynamics,
            disturbance_laws,
            measurement,
            noise_laws,
            dyn_order,
            meas_order,
            compiled_dynamics,
            compiled_measurement,
            dfdx,
            dfdw,
            dhdx,
            dhdv,
        })
    }

    /// Replaces the measurement part, keeping the dynamics.
    pub fn with_measurement(
        self,
        measurement: Vec<MomentExpr>,
        noise_laws: Vec<(String, Distribution1D)>,
    ) -> Result<Self> {
        StateSpaceModel::new(
            self.state_names,
            self.input_names,
            self.dynamics,
            self.disturbance_laws,
            measurement,
            noise_laws,
        )
    }

    pub fn state_dim(&self) -> usize {
        self.state_names.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_names.len()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.disturbance_laws.len()
    }

    pub fn measurement_dim(&self) -> usize {
        self.measurement.len()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_laws.len()
    }

    pub fn disturbance_means(&self) -> Vec<f64> {
        self.disturbance_laws.iter().map(|(_, d)| d.mean()).collect()
    }

    pub fn disturbance_variances(&self) -> Vec<f64> {
        self.disturbance_laws
            .iter()
            .map(|(_, d)| d.variance())
            .collect()
    }

    pub fn noise_means(&self) -> Vec<f64> {
        self.noise_laws.iter().map(|(_, d)| d.mean()).collect()
    }

    pub fn noise_variances(&self) -> Vec<f64> {
        self.noise_laws.iter().map(|(_, d)| d.variance()).collect()
    }

    /// Dynamics expressions with the inputs substituted as numeric constants.
    pub fn dynamics_with_inputs(&self, input: &[f64]) -> Result<Vec<MomentExpr>> {
        if input.len() != self.input_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} inputs, got {}",
                self.input_names.len(),
                input.len()
            )));
        }
        let map: std::collections::BTreeMap<String, MomentExpr> = self
            .input_names
            .iter()
            .zip(input)
            .map(|(n, v)| (n.clone(), MomentExpr::Constant(*v)))
            .collect();
        self.dynamics.iter().map(|e| e.substitute(&map)).collect()
    }

    fn dyn_values(&self, state: &[f64], input: &[f64], disturbance: &[f64]) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.state_dim());
        debug_assert_eq!(input.len(), self.input_dim());
        debug_assert_eq!(disturbance.len(), self.disturbance_dim());
        let mut values = Vec::with_capacity(self.dyn_order.len());
        values.extend_from_slice(state);
        values.extend_from_slice(input);
        values.extend_from_slice(disturbance);
        values
    }

    fn meas_values(&self, state: &[f64], noise: &[f64]) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.state_dim());
        debug_assert_eq!(noise.len(), self.noise_dim());
        let mut values = Vec::with_capacity(self.meas_order.len());
        values.extend_from_slice(state);
        values.extend_from_slice(noise);
        values
    }

    /// Pointwise next state f(x, u, w).
    pub fn eval_dynamics(&self, state: &[f64], input: &[f64], disturbance: &[f64]) -> Vec<f64> {
        let values = self.dyn_values(state, input, disturbance);
        self.compiled_dynamics
            .iter()
            .map(|c| c.eval(&values))
            .collect()
    }

    /// Pointwise measurement h(x, v).
    pub fn eval_measurement(&self, state: &[f64], noise: &[f64]) -> Vec<f64> {
        let values = self.meas_values(state, noise);
        self.compiled_measurement
            .iter()
            .map(|c| c.eval(&values))
            .collect()
    }

    fn eval_jacobian(table: &[Vec<CompiledExpr>], values: &[f64]) -> Mat {
        let rows = table.len();
        let cols = table.first().map_or(0, |r| r.len());
        let mut out = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = table[i][j].eval(values);
            }
        }
        out
    }

    /// ∂f/∂x at a linearization point.
    pub fn eval_dfdx(&self, state: &[f64], input: &[f64], disturbance: &[f64]) -> Mat {
        Self::eval_jacobian(&self.dfdx, &self.dyn_values(state, input, disturbance))
    }

    /// ∂f/∂w at a linearization point.
    pub fn eval_dfdw(&self, state: &[f64], input: &[f64], disturbance: &[f64]) -> Mat {
        Self::eval_jacobian(&self.dfdw, &self.dyn_values(state, input, disturbance))
    }

    /// ∂h/∂x at a linearization point.
    pub fn eval_dhdx(&self, state: &[f64], noise: &[f64]) -> Mat {
        Self::eval_jacobian(&self.dhdx, &self.meas_values(state, noise))
    }

    /// ∂h/∂v at a linearization point.
    pub fn eval_dhdv(&self, state: &[f64], noise: &[f64]) -> Mat {
        Self::eval_jacobian(&self.dhdv, &self.meas_values(state, noise))
    }
}

/// blockdiag(S, diag(extra)).
pub(crate) fn block_diag(s: &SymMatrix, extra: &[f64]) -> SymMatrix {
    let n = s.dim();
    let total = n + extra.len();
    SymMatrix::from_fn(total, |i, j| {
        if i < n && j < n {
            s.get(i, j)
        } else if i == j {
            extra[i - n]
        } else {
            0.0
        }
    })
}


//! Exact moment propagation for mixed-trigonometric-polynomial functions of
//! random vectors, and a moment-based Kalman filter built on it.
//!
//! The core pipeline computes exact expectations E[f(x)] where f is any sum of
//! products of integer powers and sin/cos factors of the components of x, and
//! x is a correlated Gaussian block (whitened through an eigendecomposition of
//! its covariance) together with independent scalar variables (Gaussian,
//! Exponential, or Uniform). On top of that sit a predict/update filter that
//! propagates exact first and second moments through nonlinear models, the
//! classical EKF/UKF/KF baselines, differential-drive and range-bearing robot
//! models, a seeded Monte Carlo oracle, and dataset tooling.

pub mod dataio;
pub mod dist;
pub mod error;
pub mod expand;
pub mod expr;
pub mod filters;
pub mod linalg;
pub mod mc;
pub mod models;

pub use error::{Error, Result};

//! Drives the filters over a resampled dataset: one prediction per step with
//! the zero-order-held input, then one sequential update per measurement in
//! the step's bin. Multiple landmarks observed at the same step are processed
//! as consecutive two-dimensional updates, keeping each innovation 2x2.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use mkf::dataio::{ScenarioKind, SyntheticScenario, TimeStep};
use mkf::dist::Distribution1D;
use mkf::error::Error as MkfError;
use mkf::filters::{
    ekf_predict, ekf_update, mkf_predict, mkf_update, ukf_predict, ukf_update, GaussianBelief,
    StateSpaceModel, UkfParams,
};
use mkf::linalg::SymMatrix;
use mkf::mc::SeededSampler;
use mkf::models::{
    diff_drive_model, error_metrics, linear_test_model, range_bearing_exprs, DiffDriveConfig,
    ErrorMetrics, LandmarkMap, RangeBearingNoise, LINEAR_MEASUREMENT_VARS as LINEAR_R,
    NOISE_NAMES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FilterKind {
    Ekf,
    Ukf,
    Mkf,
}

impl FilterKind {
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Ekf => "ekf",
            FilterKind::Ukf => "ukf",
            FilterKind::Mkf => "mkf",
        }
    }

    pub fn parse_list(text: &str) -> Result<Vec<FilterKind>> {
        let mut out = Vec::new();
        for part in text.split(',') {
            let kind = match part.trim() {
                "ekf" => FilterKind::Ekf,
                "ukf" => FilterKind::Ukf,
                "mkf" => FilterKind::Mkf,
                other => bail!("unknown filter `{other}` (expected ekf, ukf, mkf)"),
            };
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            bail!("no filters selected");
        }
        Ok(out)
    }
}

/// The model family the filters assume for a run.
pub enum RunModel {
    DiffDrive {
        dynamics: StateSpaceModel,
        map: LandmarkMap,
        noise: RangeBearingNoise,
    },
    Linear {
        model: StateSpaceModel,
    },
}

impl RunModel {
    /// Model the filters assume for a synthetic scenario under the given
    /// measurement-noise laws.
    pub fn for_scenario(
        scenario: &SyntheticScenario,
        noise: &RangeBearingNoise,
    ) -> Result<RunModel> {
        match scenario.kind {
            ScenarioKind::DiffDrive => Ok(RunModel::DiffDrive {
                dynamics: diff_drive_model(&DiffDriveConfig::new(
                    scenario.dt,
                    scenario.speed_disturbance,
                    scenario.yaw_rate_disturbance,
                )?)?,
                map: LandmarkMap::new(scenario.landmarks.clone())?,
                noise: noise.clone(),
            }),
            ScenarioKind::Linear => Ok(RunModel::Linear {
                model: linear_test_model(
                    scenario.dt,
                    (
                        scenario.speed_disturbance.variance(),
                        scenario.yaw_rate_disturbance.variance(),
                    ),
                    LINEAR_R,
                )?,
            }),
        }
    }

    /// Model for a real dataset run: diff-drive with the standard
    /// disturbances, landmarks from the dataset.
    pub fn for_dataset(
        map: LandmarkMap,
        dt: f64,
        noise: &RangeBearingNoise,
    ) -> Result<RunModel> {
        Ok(RunModel::DiffDrive {
            dynamics: diff_drive_model(&DiffDriveConfig::with_standard_noise(dt)?)?,
            map,
            noise: noise.clone(),
        })
    }

    pub fn state_dim(&self) -> usize {
        match self {
            RunModel::DiffDrive { dynamics, .. } => dynamics.state_dim(),
            RunModel::Linear { model } => model.state_dim(),
        }
    }

    pub fn yaw_index(&self) -> Option<usize> {
        match self {
            RunModel::DiffDrive { .. } => Some(2),
            RunModel::Linear { .. } => None,
        }
    }

    pub fn state_names(&self) -> &[String] {
        match self {
            RunModel::DiffDrive { dynamics, .. } => &dynamics.state_names,
            RunModel::Linear { model } => &model.state_names,
        }
    }

    fn dynamics(&self) -> &StateSpaceModel {
        match self {
            RunModel::DiffDrive { dynamics, .. } => dynamics,
            RunModel::Linear { model } => model,
        }
    }

    /// The full model used for an update against one landmark (diff-drive) or
    /// the fixed linear measurement.
    fn measurement_model(
        &self,
        landmark_id: u32,
        cache: &mut BTreeMap<u32, StateSpaceModel>,
    ) -> Result<StateSpaceModel> {
        match self {
            RunModel::Linear { model } => Ok(model.clone()),
            RunModel::DiffDrive {
                dynamics,
                map,
                noise,
            } => {
                if let Some(m) = cache.get(&landmark_id) {
                    return Ok(m.clone());
                }
                let (xl, yl) = map
                    .get(landmark_id)
                    .ok_or_else(|| anyhow!("unknown landmark id {landmark_id}"))?;
                let model = dynamics.clone().with_measurement(
                    range_bearing_exprs(xl, yl).map_err(|e| anyhow!("{e}"))?,
                    vec![
                        (NOISE_NAMES[0].to_string(), noise.range_factor),
                        (NOISE_NAMES[1].to_string(), noise.bearing_offset),
                    ],
                )?;
                cache.insert(landmark_id, model.clone());
                Ok(model)
            }
        }
    }

    /// Converts a stored measurement row to the filter's observation vector.
    fn observation(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            // range-bearing rows store (r̂, phî); the filter consumes the
            // Cartesian pair (r̂ cos phî, r̂ sin phî)
            RunModel::DiffDrive { .. } => vec![a * b.cos(), a * b.sin()],
            RunModel::Linear { .. } => vec![a, b],
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub filters: Vec<FilterKind>,
    pub ukf_params: UkfParams,
    pub initial_cov: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct StepEstimate {
    pub t: f64,
    pub mean: Vec<f64>,
    pub var_diag: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FilterRun {
    pub estimates: Vec<StepEstimate>,
    pub metrics: ErrorMetrics,
    pub updates: usize,
}

/// Initial belief: ground truth at the first step plus a seeded Gaussian
/// perturbation of the configured variance (shared across filters).
pub fn initial_belief(steps: &[TimeStep], model: &RunModel, cfg: &RunConfig) -> Result<GaussianBelief> {
    let n = model.state_dim();
    let mut sampler = SeededSampler::new(cfg.seed, 1_000_000);
    let mut mean = Vec::with_capacity(n);
    for i in 0..n {
        let truth = steps[0].truth.get(i).copied().unwrap_or(0.0);
        mean.push(truth + cfg.initial_cov.sqrt() * sampler.standard_normal());
    }
    GaussianBelief::new(mean, SymMatrix::diag(&vec![cfg.initial_cov; n])).map_err(|e| anyhow!("{e}"))
}

/// Runs one filter over the aligned steps. Divergence (non-finite estimates
/// or a failed update) is an error naming the step.
pub fn run_filter(
    kind: FilterKind,
    steps: &[TimeStep],
    model: &RunModel,
    cfg: &RunConfig,
    initial: &GaussianBelief,
) -> Result<FilterRun> {
    let dynamics = model.dynamics();
    let mut measurement_models: BTreeMap<u32, StateSpaceModel> = BTreeMap::new();
    let mut belief = initial.clone();
    let mut estimates = Vec::with_capacity(steps.len());
    let mut updates = 0usize;
    estimates.push(StepEstimate {
        t: steps[0].t,
        mean: belief.mean.clone(),
        var_diag: belief.cov.diagonal(),
    });
    for k in 1..steps.len() {
        let input = [steps[k - 1].input.0, steps[k - 1].input.1];
        let step_err = |e: MkfError| anyhow!("{} diverged at step {k}: {e}", kind.name());
        belief = match kind {
            FilterKind::Mkf => mkf_predict(dynamics, &belief, &input).map_err(step_err)?,
            FilterKind::Ekf => ekf_predict(dynamics, &belief, &input).map_err(step_err)?,
            FilterKind::Ukf => {
                ukf_predict(dynamics, &belief, &input, &cfg.ukf_params).map_err(step_err)?
            }
        };
        for (landmark_id, a, b) in &steps[k].measurements {
            let m = model.measurement_model(*landmark_id, &mut measurement_models)?;
            let z = model.observation(*a, *b);
            let step_err = |e: MkfError| anyhow!("{} diverged at step {k}: {e}", kind.name());
            let (next, _) = match kind {
                FilterKind::Mkf => mkf_update(&m, &belief, &z).map_err(step_err)?,
                FilterKind::Ekf => ekf_update(&m, &belief, &z).map_err(step_err)?,
                FilterKind::Ukf => {
                    ukf_update(&m, &belief, &z, &cfg.ukf_params).map_err(step_err)?
                }
            };
            belief = next;
            updates += 1;
        }
        if !belief.is_finite() {
            bail!("{} diverged at step {k}: non-finite belief", kind.name());
        }
        estimates.push(StepEstimate {
            t: steps[k].t,
            mean: belief.mean.clone(),
            var_diag: belief.cov.diagonal(),
        });
    }

    let est: Vec<Vec<f64>> = estimates.iter().map(|e| e.mean.clone()).collect();
    let truth: Vec<Vec<f64>> = steps.iter().map(|s| s.truth.to_vec()).collect();
    let metrics = error_metrics(&est, &truth, model.yaw_index()).map_err(|e| anyhow!("{e}"))?;
    Ok(FilterRun {
        estimates,
        metrics,
        updates,
    })
}

/// Runs every configured filter from the same initial belief.
pub fn run_all(
    steps: &[TimeStep],
    model: &RunModel,
    cfg: &RunConfig,
) -> Result<BTreeMap<&'static str, FilterRun>> {
    if steps.len() < 2 {
        bail!("need at least two aligned steps to filter");
    }
    let initial = initial_belief(steps, model, cfg)?;
    let mut out = BTreeMap::new();
    for kind in &cfg.filters {
        let run = run_filter(*kind, steps, model, cfg, &initial)?;
        out.insert(kind.name(), run);
    }
    Ok(out)
}

/// Noise laws assumed by the filters for the diff-drive measurement model.
pub fn measurement_noise(regime: &mkf::dataio::NoiseRegime) -> Result<RangeBearingNoise> {
    regime.measurement_laws().map_err(|e| anyhow!("{e}"))
}

/// Default disturbance laws for dataset runs (matching the filter model).
pub fn standard_disturbances() -> (Distribution1D, Distribution1D) {
    (
        Distribution1D::Gaussian {
            mean: 0.0,
            variance: 0.01,
        },
        Distribution1D::Gaussian {
            mean: 0.0,
            variance: 1.0,
        },
    )
}

//! Planar robot models: two-wheel differential-drive dynamics and the
//! Cartesian range-bearing landmark measurement model, plus a seeded forward
//! simulator and trajectory error metrics.
//!
//! Dynamics (sampling time dt, commanded speed v and yaw rate u, disturbances
//! wv and wu):
//!
//! ```text
//! x'  = x  + (v + wv) cos(th) dt
//! y'  = y  + (v + wv) sin(th) dt
//! th' = th + (u + wu) dt
//! ```
//!
//! A range-bearing sensor measures distance r and bearing phi to a landmark,
//! with multiplicative range noise and additive bearing noise
//! (r̂ = r·vr, phî = phi + vphi). To stay inside the
//! mixed-trigonometric-polynomial grammar the filter consumes the Cartesian
//! form y1 = r̂ cos(phî), y2 = r̂ sin(phî), which expands to
//!
//! ```text
//! y1 = ha·vr·cos(vphi) - hb·vr·sin(vphi)
//! y2 = hb·vr·cos(vphi) + ha·vr·sin(vphi)
//! ha = (xl - x) cos(th) + (yl - y) sin(th)
//! hb = (yl - y) cos(th) - (xl - x) sin(th)
//! ```

use crate::dist::Distribution1D;
use crate::error::{Error, Result};
use crate::expr::MomentExpr;
use crate::filters::StateSpaceModel;
use crate::mc::SeededSampler;

pub const STATE_NAMES: [&str; 3] = ["x", "y", "th"];
pub const INPUT_NAMES: [&str; 2] = ["v", "u"];
pub const DISTURBANCE_NAMES: [&str; 2] = ["wv", "wu"];
pub const NOISE_NAMES: [&str; 2] = ["vr", "vphi"];

/// Differential-drive configuration: sampling time and disturbance laws for
/// the speed (wv, m/s) and yaw-rate (wu, rad/s) channels.
#[derive(Clone, Debug)]
pub struct DiffDriveConfig {
    pub dt: f64,
    pub speed_disturbance: Distribution1D,
    pub yaw_rate_disturbance: Distribution1D,
}

impl DiffDriveConfig {
    pub fn new(
        dt: f64,
        speed_disturbance: Distribution1D,
        yaw_rate_disturbance: Distribution1D,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
        }
        Ok(DiffDriveConfig {
            dt,
            speed_disturbance,
            yaw_rate_disturbance,
        })
    }

    /// Standard disturbance setting: wv ~ N(0, 0.01), wu ~ N(0, 1.0).
    pub fn with_standard_noise(dt: f64) -> Result<Self> {
        DiffDriveConfig::new(
            dt,
            Distribution1D::gaussian(0.0, 0.01)?,
            Distribution1D::gaussian(0.0, 1.0)?,
        )
    }

    /// Zero-disturbance variant, for deterministic rollouts.
    pub fn noiseless(dt: f64) -> Result<Self> {
        DiffDriveConfig::new(
            dt,
            Distribution1D::gaussian(0.0, 0.0)?,
            Distribution1D::gaussian(0.0, 0.0)?,
        )
    }
}

/// Known landmark positions keyed by id.
#[derive(Clone, Debug, Default)]
pub struct LandmarkMap {
    landmarks: Vec<(u32, f64, f64)>,
}

impl LandmarkMap {
    pub fn new(landmarks: Vec<(u32, f64, f64)>) -> Result<Self> {
        let mut ids: Vec<u32> = landmarks.iter().map(|(id, _, _)| *id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != landmarks.len() {
            return Err(Error::InvalidSpec("duplicate landmark id".into()));
        }
        Ok(LandmarkMap { landmarks })
    }

    pub fn get(&self, id: u32) -> Option<(f64, f64)> {
        self.landmarks
            .iter()
            .find(|(lid, _, _)| *lid == id)
            .map(|(_, x, y)| (*x, *y))
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.landmarks.iter().map(|(id, _, _)| *id)
    }

    pub fn entries(&self) -> &[(u32, f64, f64)] {
        &self.landmarks
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }
}

/// Range-bearing sensor noise: a multiplicative range factor (unitless, mean
/// must be positive) and an additive bearing offset (rad).
#[derive(Clone, Debug)]
pub struct RangeBearingNoise {
    pub range_factor: Distribution1D,
    pub bearing_offset: Distribution1D,
}

impl RangeBearingNoise {
    pub fn new(range_factor: Distribution1D, bearing_offset: Distribution1D) -> Result<Self> {
        if !(range_factor.mean() > 0.0) || !range_factor.mean().is_finite() {
            return Err(Error::InvalidSpec(
                "range factor law must have a positive finite mean".into(),
            ));
        }
        Ok(RangeBearingNoise {
            range_factor,
            bearing_offset,
        })
    }

    /// Exact measurement: vr ≡ 1, vphi ≡ 0.
    pub fn noiseless() -> Self {
        RangeBearingNoise {
            range_factor: Distribution1D::Gaussian {
                mean: 1.0,
                variance: 0.0,
            },
            bearing_offset: Distribution1D::Gaussian {
                mean: 0.0,
                variance: 0.0,
            },
        }
    }
}

fn var(name: &str) -> MomentExpr {
    MomentExpr::var(name)
}

/// Builds the differential-drive dynamics as a dynamics-only model over
/// (x, y, th) with inputs (v, u) and disturbances (wv, wu).
pub fn diff_drive_model(cfg: &DiffDriveConfig) -> Result<StateSpaceModel> {
    let dt = MomentExpr::Constant(cfg.dt);
    let speed = MomentExpr::sum(vec![var("v"), var("wv")]);
    let fx = MomentExpr::sum(vec![
        var("x"),
        MomentExpr::product(vec![
            speed.clone(),
            MomentExpr::cos(var("th"))?,
            dt.clone(),
        ]),
    ]);
    let fy = MomentExpr::sum(vec![
        var("y"),
        MomentExpr::product(vec![
            speed,
            MomentExpr::sin(var("th"))?,
            dt.clone(),
        ]),
    ]);
    let fth = MomentExpr::sum(vec![
        var("th"),
        MomentExpr::product(vec![MomentExpr::sum(vec![var("u"), var("wu")]), dt]),
    ]);
    StateSpaceModel::new(
        STATE_NAMES.iter().map(|s| s.to_string()).collect(),
        INPUT_NAMES.iter().map(|s| s.to_string()).collect(),
        vec![fx, fy, fth],
        vec![
            (DISTURBANCE_NAMES[0].to_string(), cfg.speed_disturbance),
            (DISTURBANCE_NAMES[1].to_string(), cfg.yaw_rate_disturbance),
        ],
        vec![],
        vec![],
    )
}

/// Cartesian range-bearing measurement expressions for one landmark, over the
/// robot state (x, y, th) and noise variables (vr, vphi).
pub fn range_bearing_exprs(xl: f64, yl: f64) -> Result<Vec<MomentExpr>> {
    let dx = MomentExpr::sub(MomentExpr::Constant(xl), var("x"));
    let dy = MomentExpr::sub(MomentExpr::Constant(yl), var("y"));
    let cos_th = MomentExpr::cos(var("th"))?;
    let sin_th = MomentExpr::sin(var("th"))?;
    let ha = MomentExpr::sum(vec![
        MomentExpr::product(vec![dx.clone(), cos_th.clone()]),
        MomentExpr::product(vec![dy.clone(), sin_th.clone()]),
    ]);
    let hb = MomentExpr::sum(vec![
        MomentExpr::product(vec![dy, cos_th]),
        MomentExpr::product(vec![dx, sin_th]).neg(),
    ]);
    let cos_n = MomentExpr::cos(var("vphi"))?;
    let sin_n = MomentExpr::sin(var("vphi"))?;
    let y1 = MomentExpr::sum(vec![
        MomentExpr::product(vec![ha.clone(), var("vr"), cos_n.clone()]),
        MomentExpr::product(vec![hb.clone(), var("vr"), sin_n.clone()]).neg(),
    ]);
    let y2 = MomentExpr::sum(vec![
        MomentExpr::product(vec![hb, var("vr"), cos_n]),
        MomentExpr::product(vec![ha, var("vr"), sin_n]),
    ]);
    Ok(vec![y1, y2])
}

/// Measurement-only model for one landmark (dynamics left empty; combine
/// with [`diff_drive_model`] via [`StateSpaceModel::with_measurement`]).
pub fn range_bearing_model(
    map: &LandmarkMap,
    landmark_id: u32,
    noise: &RangeBearingNoise,
) -> Result<StateSpaceModel> {
    let (xl, yl) = map
        .get(landmark_id)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown landmark id {landmark_id}")))?;
    StateSpaceModel::new(
        STATE_NAMES.iter().map(|s| s.to_string()).collect(),
        vec![],
        vec![],
        vec![],
        range_bearing_exprs(xl, yl)?,
        vec![
            (NOISE_NAMES[0].to_string(), noise.range_factor),
            (NOISE_NAMES[1].to_string(), noise.bearing_offset),
        ],
    )
}

/// Full robot model for one landmark: diff-drive dynamics plus that
/// landmark's range-bearing measurement.
pub fn robot_model(
    cfg: &DiffDriveConfig,
    map: &LandmarkMap,
    landmark_id: u32,
    noise: &RangeBearingNoise,
) -> Result<StateSpaceModel> {
    let (xl, yl) = map
        .get(landmark_id)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown landmark id {landmark_id}")))?;
    diff_drive_model(cfg)?.with_measurement(
        range_bearing_exprs(xl, yl)?,
        vec![
            (NOISE_NAMES[0].to_string(), noise.range_factor),
            (NOISE_NAMES[1].to_string(), noise.bearing_offset),
        ],
    )
}

/// Two-state linear-Gaussian sanity model: s1' = s1 + dt·s2 + w1,
/// s2' = 0.95·s2 + dt·u + w2, measuring both states with additive Gaussian
/// noise. On this model the nonlinear filters must coincide with the
/// classical Kalman filter.
pub fn linear_test_model(
    dt: f64,
    process_vars: (f64, f64),
    measurement_vars: (f64, f64),
) -> Result<StateSpaceModel> {
    let f1 = MomentExpr::sum(vec![
        var("s1"),
        MomentExpr::product(vec![MomentExpr::Constant(dt), var("s2")]),
        var("w1"),
    ]);
    let f2 = MomentExpr::sum(vec![
        MomentExpr::product(vec![MomentExpr::Constant(0.95), var("s2")]),
        MomentExpr::product(vec![MomentExpr::Constant(dt), var("u")]),
        var("w2"),
    ]);
    let h1 = MomentExpr::sum(vec![var("s1"), var("n1")]);
    let h2 = MomentExpr::sum(vec![var("s2"), var("n2")]);
    StateSpaceModel::new(
        vec!["s1".into(), "s2".into()],
        vec!["v".into(), "u".into()],
        vec![f1, f2],
        vec![
            ("w1".into(), Distribution1D::gaussian(0.0, process_vars.0)?),
            ("w2".into(), Distribution1D::gaussian(0.0, process_vars.1)?),
        ],
        vec![h1, h2],
        vec![
            ("n1".into(), Distribution1D::gaussian(0.0, measurement_vars.0)?),
            ("n2".into(), Distribution1D::gaussian(0.0, measurement_vars.1)?),
        ],
    )
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// True range and bearing from a robot pose to a landmark; the bearing uses
/// the two-argument arctangent so all quadrants are correct.
pub fn true_range_bearing(state: &[f64], xl: f64, yl: f64) -> (f64, f64) {
    let dx = xl - state[0];
    let dy = yl - state[1];
    let r = (dx * dx + dy * dy).sqrt();
    let phi = wrap_angle(dy.atan2(dx) - state[2]);
    (r, phi)
}

/// One sampled range-bearing observation: r̂ = r·vr, phî = phi + vphi.
pub fn observe_range_bearing(
    state: &[f64],
    xl: f64,
    yl: f64,
    noise: &RangeBearingNoise,
    sampler: &mut SeededSampler,
) -> (f64, f64) {
    let (r, phi) = true_range_bearing(state, xl, yl);
    let r_hat = r * sampler.sample(&noise.range_factor);
    let phi_hat = wrap_angle(phi + sampler.sample(&noise.bearing_offset));
    (r_hat, phi_hat)
}

/// Forward rollout of the dynamics with sampled disturbances. Returns the
/// state sequence including the initial state (length = inputs.len() + 1).
/// With zero-variance disturbance laws this is the deterministic rollout.
pub fn rollout(
    model: &StateSpaceModel,
    initial_state: &[f64],
    inputs: &[Vec<f64>],
    seed: u64,
    stream: u64,
) -> Result<Vec<Vec<f64>>> {
    if initial_state.len() != model.state_dim() {
        return Err(Error::DimensionMismatch(
            "initial state does not match model".into(),
        ));
    }
    let mut sampler = SeededSampler::new(seed, stream);
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(initial_state.to_vec());
    let laws = model.disturbance_laws.clone();
    let mut disturbance = vec![0.0; laws.len()];
    for input in inputs {
        for (slot, (_, law)) in disturbance.iter_mut().zip(&laws) {
            *slot = sampler.sample(law);
        }
        let next = model.eval_dynamics(states.last().unwrap(), input, &disturbance);
        states.push(next);
    }
    Ok(states)
}

/// Mean position and yaw errors between an estimated and true trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics {
    pub mean_position_error: f64,
    pub mean_yaw_error: Option<f64>,
}

/// Position error is the Euclidean distance over the first two states; yaw
/// error (when `yaw_index` names an angle state) is the absolute residual
/// after wrapping to (-π, π].
pub fn error_metrics(
    estimates: &[Vec<f64>],
    truth: &[Vec<f64>],
    yaw_index: Option<usize>,
) -> Result<ErrorMetrics> {
    if estimates.len() != truth.len() || estimates.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates vs {} truth states",
            estimates.len(),
            truth.len()
        )));
    }
    let n = estimates.len() as f64;
    let mut pos = 0.0;
    let mut yaw = 0.0;
    for (est, tru) in estimates.iter().zip(truth) {
        let dx = est[0] - tru[0];
        let dy = est[1] - tru[1];
        pos += (dx * dx + dy * dy).sqrt();
        if let Some(k) = yaw_index {
            yaw += wrap_angle(est[k] - tru[k]).abs();
        }
    }
    Ok(ErrorMetrics {
        mean_position_error: pos / n,
        mean_yaw_error: yaw_index.map(|_| yaw / n),
    })
}

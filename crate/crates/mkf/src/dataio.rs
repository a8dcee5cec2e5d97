//! Dataset ingestion and generation: whitespace-delimited text streams in the
//! public multi-robot localization dataset layout (odometry, measurements,
//! ground truth, landmark positions, barcode table), time alignment onto a
//! fixed step grid, measurement-noise reinjection from ground truth, and a
//! synthetic scenario generator driving the robot models.
//!
//! A dataset directory holds five component files named by a `manifest.txt`
//! of `key = filename` lines (keys `odometry`, `measurements`, `groundtruth`,
//! `landmarks`, `barcodes`); without a manifest those names with a `.dat`
//! extension are assumed. Lines starting with `#` are comments. Columns:
//!
//! ```text
//! odometry:      time  v  u
//! measurements:  time  barcode  range  bearing
//! groundtruth:   time  x  y  theta
//! landmarks:     subject  x  y  x_std  y_std
//! barcodes:      subject  barcode
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::dist::Distribution1D;
use crate::error::{Error, Result};
use crate::filters::StateSpaceModel;
use crate::mc::SeededSampler;
use crate::models::{self, wrap_angle, DiffDriveConfig, LandmarkMap, RangeBearingNoise};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdometrySample {
    pub t: f64,
    pub v: f64,
    pub u: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementSample {
    pub t: f64,
    pub landmark_id: u32,
    pub range: f64,
    pub bearing: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruthSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LandmarkRow {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub x_std: f64,
    pub y_std: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoadStats {
    pub dropped_unknown_barcode: usize,
    pub dropped_non_landmark: usize,
    pub dropped_out_of_range: usize,
    pub clamped_ranges: usize,
}

#[derive(Clone, Debug, Default)]
pub struct DatasetBundle {
    pub odometry: Vec<OdometrySample>,
    pub measurements: Vec<MeasurementSample>,
    pub groundtruth: Vec<GroundTruthSample>,
    pub landmarks: Vec<LandmarkRow>,
    pub barcodes: Vec<(u32, u32)>,
    pub stats: LoadStats,
}

impl DatasetBundle {
    pub fn landmark_map(&self) -> Result<LandmarkMap> {
        LandmarkMap::new(self.landmarks.iter().map(|l| (l.id, l.x, l.y)).collect())
    }
}

/// Measurement-noise regime: the Gaussian setting (multiplicative range
/// factor N(1.0, 0.01), additive bearing N(0, 0.0007 rad²)), the
/// non-Gaussian setting (Exponential(1.0) range factor, Uniform(-limit,
/// limit) bearing), or custom laws.
#[derive(Clone, Debug)]
pub enum NoiseRegime {
    Gaussian,
    NonGaussian { bearing_limit: f64 },
    Custom {
        range_factor: Distribution1D,
        bearing_offset: Distribution1D,
    },
}

pub const DEFAULT_BEARING_LIMIT: f64 = PI / 12.0;

impl NoiseRegime {
    pub fn measurement_laws(&self) -> Result<RangeBearingNoise> {
        match self {
            NoiseRegime::Gaussian => RangeBearingNoise::new(
                Distribution1D::gaussian(1.0, 0.01)?,
                Distribution1D::gaussian(0.0, 0.0007)?,
            ),
            NoiseRegime::NonGaussian { bearing_limit } => {
                if !(*bearing_limit > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "bearing limit must be positive, got {bearing_limit}"
                    )));
                }
                RangeBearingNoise::new(
                    Distribution1D::exponential(1.0)?,
                    Distribution1D::uniform(-bearing_limit, *bearing_limit)?,
                )
            }
            NoiseRegime::Custom {
                range_factor,
                bearing_offset,
            } => RangeBearingNoise::new(*range_factor, *bearing_offset),
        }
    }
}

const MANIFEST_NAME: &str = "manifest.txt";
const COMPONENT_KEYS: [&str; 5] = [
    "odometry",
    "measurements",
    "groundtruth",
    "landmarks",
    "barcodes",
];

fn component_paths(dir: &Path) -> Result<[PathBuf; 5]> {
    let manifest = dir.join(MANIFEST_NAME);
    let mut names: [String; 5] = COMPONENT_KEYS.map(|k| format!("{k}.dat"));
    if manifest.exists() {
        let text = std::fs::read_to_string(&manifest)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::DataFormat {
                file: manifest.display().to_string(),
                line: lineno + 1,
                msg: "expected `key = filename`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            match COMPONENT_KEYS.iter().position(|k| *k == key) {
                Some(i) => names[i] = value.to_string(),
                None => {
                    return Err(Error::DataFormat {
                        file: manifest.display().to_string(),
                        line: lineno + 1,
                        msg: format!("unknown component `{key}`"),
                    })
                }
            }
        }
    }
    Ok(names.map(|n| dir.join(n)))
}

fn parse_columns<const N: usize>(path: &Path) -> Result<Vec<(usize, [f64; N])>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != N {
            return Err(Error::DataFormat {
                file: path.display().to_string(),
                line: lineno + 1,
                msg: format!("expected {N} columns, found {}", fields.len()),
            });
        }
        let mut row = [0.0f64; N];
        for (slot, field) in row.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::DataFormat {
                file: path.display().to_string(),
                line: lineno + 1,
                msg: format!("invalid number `{field}`"),
            })?;
            if !slot.is_finite() {
                return Err(Error::DataFormat {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("non-finite value `{field}`"),
                });
            }
        }
        out.push((lineno + 1, row));
    }
    Ok(out)
}

fn as_id(value: f64, path: &Path, line: usize) -> Result<u32> {
    let id = value as u32;
    if id as f64 != value {
        return Err(Error::DataFormat {
            file: path.display().to_string(),
            line,
            msg: format!("expected an integer id, found `{value}`"),
        });
    }
    Ok(id)
}

/// Loads a dataset directory, resolving measurement barcodes to landmark ids.
/// Measurements whose barcode is unknown, or which refer to a non-landmark
/// subject (another robot), are dropped and counted in the returned stats.
pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let [odo_path, meas_path, gt_path, lm_path, bc_path] = component_paths(dir)?;

    let mut bundle = DatasetBundle::default();
    for (_, [t, v, u]) in parse_columns::<3>(&odo_path)? {
        bundle.odometry.push(OdometrySample { t, v, u });
    }
    for (line, [id, x, y, xs, ys]) in parse_columns::<5>(&lm_path)? {
        bundle.landmarks.push(LandmarkRow {
            id: as_id(id, &lm_path, line)?,
            x,
            y,
            x_std: xs,
            y_std: ys,
        });
    }
    for (line, [subject, barcode]) in parse_columns::<2>(&bc_path)? {
        bundle.barcodes.push((
            as_id(subject, &bc_path, line)?,
            as_id(barcode, &bc_path, line)?,
        ));
    }
    let landmark_ids: std::collections::BTreeSet<u32> =
        bundle.landmarks.iter().map(|l| l.id).collect();
    for (line, [t, barcode, range, bearing]) in parse_columns::<4>(&meas_path)? {
        let barcode = as_id(barcode, &meas_path, line)?;
        let subject = bundle
            .barcodes
            .iter()
            .find(|(_, b)| *b == barcode)
            .map(|(s, _)| *s);
        match subject {
            None => bundle.stats.dropped_unknown_barcode += 1,
            Some(s) if !landmark_ids.contains(&s) => bundle.stats.dropped_non_landmark += 1,
            Some(s) => bundle.measurements.push(MeasurementSample {
                t,
                landmark_id: s,
                range,
                bearing,
            }),
        }
    }
    for (_, [t, x, y, theta]) in parse_columns::<4>(&gt_path)? {
        bundle.groundtruth.push(GroundTruthSample { t, x, y, theta });
    }

    // stable sorts keep the original order of equal timestamps
    bundle.odometry.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    bundle
        .measurements
        .sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    bundle
        .groundtruth
        .sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    Ok(bundle)
}

/// Writes a bundle in canonical form (default filenames plus a manifest).
/// Floats are written in shortest round-trip form, so `save(load(x))` is
/// byte-identical for files that were produced by `save`.
pub fn save_dataset(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest: String = COMPONENT_KEYS
        .iter()
        .map(|k| format!("{k} = {k}.dat\n"))
        .collect();
    std::fs::write(dir.join(MANIFEST_NAME), manifest)?;

    let mut odo = String::from("# time v u\n");
    for s in &bundle.odometry {
        odo.push_str(&format!("{} {} {}\n", s.t, s.v, s.u));
    }
    std::fs::write(dir.join("odometry.dat"), odo)?;

    let barcode_of = |subject: u32| -> u32 {
        bundle
            .barcodes
            .iter()
            .find(|(s, _)| *s == subject)
            .map(|(_, b)| *b)
            .unwrap_or(subject)
    };
    let mut meas = String::from("# time barcode range bearing\n");
    for m in &bundle.measurements {
        meas.push_str(&format!(
            "{} {} {} {}\n",
            m.t,
            barcode_of(m.landmark_id),
            m.range,
            m.bearing
        ));
    }
    std::fs::write(dir.join("measurements.dat"), meas)?;

    let mut gt = String::from("# time x y theta\n");
    for g in &bundle.groundtruth {
        gt.push_str(&format!("{} {} {} {}\n", g.t, g.x, g.y, g.theta));
    }
    std::fs::write(dir.join("groundtruth.dat"), gt)?;

    let mut lm = String::from("# subject x y x_std y_std\n");
    for l in &bundle.landmarks {
        lm.push_str(&format!(
            "{} {} {} {} {}\n",
            l.id, l.x, l.y, l.x_std, l.y_std
        ));
    }
    std::fs::write(dir.join("landmarks.dat"), lm)?;

    let mut bc = String::from("# subject barcode\n");
    for (s, b) in &bundle.barcodes {
        bc.push_str(&format!("{s} {b}\n"));
    }
    std::fs::write(dir.join("barcodes.dat"), bc)?;
    Ok(())
}

/// Median odometry sampling interval — the native step for real datasets.
pub fn native_odometry_dt(bundle: &DatasetBundle) -> Option<f64> {
    let mut gaps: Vec<f64> = bundle
        .odometry
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .filter(|g| *g > 0.0)
        .collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(gaps[gaps.len() / 2])
}

/// Linear interpolation of the ground-truth pose; yaw is interpolated on the
/// circle (shortest arc) so the ±π seam stays continuous.
pub fn interpolate_pose(groundtruth: &[GroundTruthSample], t: f64) -> Option<[f64; 3]> {
    if groundtruth.is_empty() {
        return None;
    }
    let first = groundtruth.first().unwrap();
    let last = groundtruth.last().unwrap();
    if t < first.t || t > last.t {
        return None;
    }
    let idx = groundtruth.partition_point(|g| g.t <= t);
    if idx == 0 {
        return Some([first.x, first.y, first.theta]);
    }
    if idx >= groundtruth.len() {
        return Some([last.x, last.y, last.theta]);
    }
    let a = &groundtruth[idx - 1];
    let b = &groundtruth[idx];
    let span = b.t - a.t;
    if span <= 0.0 {
        return Some([a.x, a.y, a.theta]);
    }
    let frac = (t - a.t) / span;
    let theta = wrap_angle(a.theta + frac * wrap_angle(b.theta - a.theta));
    Some([
        a.x + frac * (b.x - a.x),
        a.y + frac * (b.y - a.y),
        theta,
    ])
}

/// One aligned step: zero-order-held input at the step start, measurements
/// binned to the nearest step, and interpolated ground truth.
#[derive(Clone, Debug)]
pub struct TimeStep {
    pub t: f64,
    pub input: (f64, f64),
    pub measurements: Vec<(u32, f64, f64)>,
    pub truth: [f64; 3],
}

/// Aligns the dataset streams onto a fixed dt grid starting at the latest
/// common start time and ending at the earliest common end time.
pub fn resample(bundle: &DatasetBundle, dt: f64) -> Result<Vec<TimeStep>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
    }
    if bundle.odometry.is_empty() || bundle.groundtruth.is_empty() {
        return Err(Error::InvalidSpec(
            "resample needs odometry and ground truth".into(),
        ));
    }
    let t0 = bundle.odometry[0].t.max(bundle.groundtruth[0].t);
    let t_end = bundle
        .odometry
        .last()
        .unwrap()
        .t
        .min(bundle.groundtruth.last().unwrap().t);
    if t_end < t0 {
        return Err(Error::InvalidSpec(
            "odometry and ground truth do not overlap in time".into(),
        ));
    }
    let count = ((t_end - t0) / dt + 1e-9).floor() as usize;

    let mut steps = Vec::with_capacity(count + 1);
    let mut odo_idx = 0usize;
    for k in 0..=count {
        let t = t0 + k as f64 * dt;
        while odo_idx + 1 < bundle.odometry.len() && bundle.odometry[odo_idx + 1].t <= t + 1e-12 {
            odo_idx += 1;
        }
        let o = &bundle.odometry[odo_idx];
        let truth = interpolate_pose(&bundle.groundtruth, t)
            .unwrap_or_else(|| {
                let g = bundle.groundtruth.last().unwrap();
                [g.x, g.y, g.theta]
            });
        steps.push(TimeStep {
            t,
            input: (o.v, o.u),
            measurements: Vec::new(),
            truth,
        });
    }
    for m in &bundle.measurements {
        let k = ((m.t - t0) / dt).round();
        if k < 0.0 || k > count as f64 {
            continue;
        }
        steps[k as usize]
            .measurements
            .push((m.landmark_id, m.range, m.bearing));
    }
    Ok(steps)
}

/// Recomputes every measurement from the ground truth and landmark positions,
/// then corrupts it with the regime's laws: r̂ = r·vr, phî = phi + vphi.
/// Non-positive noisy ranges are clamped to a 1e-6 floor and counted.
pub fn reinject_noise(
    bundle: &DatasetBundle,
    regime: &NoiseRegime,
    seed: u64,
) -> Result<DatasetBundle> {
    let laws = regime.measurement_laws()?;
    let map = bundle.landmark_map()?;
    let mut out = bundle.clone();
    let mut sampler = SeededSampler::new(seed, 0);
    let mut kept = Vec::with_capacity(out.measurements.len());
    for m in &out.measurements {
        let Some(pose) = interpolate_pose(&bundle.groundtruth, m.t) else {
            out.stats.dropped_out_of_range += 1;
            continue;
        };
        let Some((xl, yl)) = map.get(m.landmark_id) else {
            out.stats.dropped_non_landmark += 1;
            continue;
        };
        let (r, phi) = models::true_range_bearing(&pose, xl, yl);
        let mut r_hat = r * sampler.sample(&laws.range_factor);
        if r_hat <= 0.0 {
            r_hat = 1e-6;
            out.stats.clamped_ranges += 1;
        }
        let phi_hat = wrap_angle(phi + sampler.sample(&laws.bearing_offset));
        kept.push(MeasurementSample {
            t: m.t,
            landmark_id: m.landmark_id,
            range: r_hat,
            bearing: phi_hat,
        });
    }
    out.measurements = kept;
    Ok(out)
}

/// Which model family a synthetic scenario drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    DiffDrive,
    Linear,
}

/// Synthetic scenario: a differential-drive run with constant speed, a
/// sinusoidal yaw-rate profile, and periodic landmark observations — or the
/// two-state linear sanity model with the same scheduling.
#[derive(Clone, Debug)]
pub struct SyntheticScenario {
    pub kind: ScenarioKind,
    pub steps: usize,
    pub dt: f64,
    pub initial_state: Vec<f64>,
    pub speed: f64,
    pub yaw_rate_base: f64,
    pub yaw_rate_amplitude: f64,
    pub yaw_rate_period: f64,
    pub landmarks: Vec<(u32, f64, f64)>,
    pub measure_every: usize,
    pub speed_disturbance: Distribution1D,
    pub yaw_rate_disturbance: Distribution1D,
}

impl SyntheticScenario {
    /// A circuit-driving diff-drive scenario with the standard disturbances.
    pub fn default_diff_drive() -> Self {
        SyntheticScenario {
            kind: ScenarioKind::DiffDrive,
            steps: 400,
            dt: 0.02,
            initial_state: vec![0.0, 0.0, 0.0],
            speed: 1.0,
            yaw_rate_base: 0.0,
            yaw_rate_amplitude: 0.8,
            yaw_rate_period: 8.0,
            landmarks: vec![(1, 4.0, 0.0), (2, 0.0, 4.0), (3, -3.0, -2.0)],
            measure_every: 5,
            speed_disturbance: Distribution1D::Gaussian {
                mean: 0.0,
                variance: 0.01,
            },
            yaw_rate_disturbance: Distribution1D::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
        }
    }

    pub fn input_at(&self, k: usize) -> (f64, f64) {
        let t = k as f64 * self.dt;
        let u = if self.yaw_rate_period > 0.0 {
            self.yaw_rate_base
                + self.yaw_rate_amplitude * (std::f64::consts::TAU * t / self.yaw_rate_period).sin()
        } else {
            self.yaw_rate_base
        };
        (self.speed, u)
    }

    /// The dynamics model the filters should assume for this scenario.
    pub fn dynamics_model(&self) -> Result<StateSpaceModel> {
        match self.kind {
            ScenarioKind::DiffDrive => models::diff_drive_model(&DiffDriveConfig::new(
                self.dt,
                self.speed_disturbance,
                self.yaw_rate_disturbance,
            )?),
            ScenarioKind::Linear => models::linear_test_model(
                self.dt,
                (
                    self.speed_disturbance.variance(),
                    self.yaw_rate_disturbance.variance(),
                ),
                LINEAR_MEASUREMENT_VARS,
            ),
        }
    }
}

/// Measurement-noise variances of the linear sanity model.
pub const LINEAR_MEASUREMENT_VARS: (f64, f64) = (0.01, 0.01);

/// Simulates a scenario into a dataset bundle. Ground truth is the sampled
/// rollout; odometry records the commanded inputs; measurements are sampled
/// from the regime's laws (ignored for the linear model, which uses its
/// additive Gaussian noise).
pub fn generate_synthetic(
    scenario: &SyntheticScenario,
    regime: &NoiseRegime,
    seed: u64,
) -> Result<DatasetBundle> {
    if scenario.steps == 0 || scenario.measure_every == 0 {
        return Err(Error::InvalidSpec(
            "scenario needs steps > 0 and measure_every > 0".into(),
        ));
    }
    let model = scenario.dynamics_model()?;
    if scenario.initial_state.len() != model.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries for a {}-state model",
            scenario.initial_state.len(),
            model.state_dim()
        )));
    }
    let inputs: Vec<Vec<f64>> = (0..scenario.steps)
        .map(|k| {
            let (v, u) = scenario.input_at(k);
            vec![v, u]
        })
        .collect();
    let states = models::rollout(&model, &scenario.initial_state, &inputs, seed, 0)?;

    let mut bundle = DatasetBundle::default();
    for (k, input) in inputs.iter().enumerate() {
        bundle.odometry.push(OdometrySample {
            t: k as f64 * scenario.dt,
            v: input[0],
            u: input[1],
        });
    }
    // repeat the final input so odometry spans the full trajectory
    bundle.odometry.push(OdometrySample {
        t: scenario.steps as f64 * scenario.dt,
        v: inputs.last().unwrap()[0],
        u: inputs.last().unwrap()[1],
    });
    for (k, s) in states.iter().enumerate() {
        bundle.groundtruth.push(GroundTruthSample {
            t: k as f64 * scenario.dt,
            x: s[0],
            y: s[1],
            theta: if s.len() > 2 { s[2] } else { 0.0 },
        });
    }
    for (id, x, y) in &scenario.landmarks {
        bundle.landmarks.push(LandmarkRow {
            id: *id,
            x: *x,
            y: *y,
            x_std: 0.0,
            y_std: 0.0,
        });
        bundle.barcodes.push((*id, *id));
    }

    let mut sampler = SeededSampler::new(seed, 1);
    match scenario.kind {
        ScenarioKind::DiffDrive => {
            let laws = regime.measurement_laws()?;
            for k in 1..=scenario.steps {
                if k % scenario.measure_every != 0 {
                    continue;
                }
                let t = k as f64 * scenario.dt;
                for (id, xl, yl) in &scenario.landmarks {
                    let (mut r_hat, phi_hat) = models::observe_range_bearing(
                        &states[k],
                        *xl,
                        *yl,
                        &laws,
                        &mut sampler,
                    );
                    if r_hat <= 0.0 {
                        r_hat = 1e-6;
                        bundle.stats.clamped_ranges += 1;
                    }
                    bundle.measurements.push(MeasurementSample {
                        t,
                        landmark_id: *id,
                        range: r_hat,
                        bearing: phi_hat,
                    });
                }
            }
        }
        ScenarioKind::Linear => {
            for k in 1..=scenario.steps {
                if k % scenario.measure_every != 0 {
                    continue;
                }
                let noise: Vec<f64> = model
                    .noise_laws
                    .iter()
                    .map(|(_, law)| sampler.sample(law))
                    .collect();
                let z = model.eval_measurement(&states[k], &noise);
                bundle.measurements.push(MeasurementSample {
                    t: k as f64 * scenario.dt,
                    landmark_id: 0,
                    range: z[0],
                    bearing: z[1],
                });
            }
            bundle.barcodes.push((0, 0));
            bundle.landmarks.push(LandmarkRow {
                id: 0,
                x: 0.0,
                y: 0.0,
                x_std: 0.0,
                y_std: 0.0,
            });
        }
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_dataset(dir: &Path, files: &[(&str, &str)]) {
        std::fs::create_dir_all(dir).unwrap();
        for (name, content) in files {
            std::fs::write(dir.join(name), content).unwrap();
        }
    }

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("mkf-dataio-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn odometry_line_parses_verbatim() {
        let dir = tmpdir("odoline");
        write_dataset(
            &dir,
            &[
                ("odometry.dat", "# header\n1248272272.841 0.1 0.05\n"),
                ("measurements.dat", ""),
                ("groundtruth.dat", "1248272272.0 0 0 0\n"),
                ("landmarks.dat", ""),
                ("barcodes.dat", ""),
            ],
        );
        let bundle = load_dataset(&dir).unwrap();
        assert_eq!(
            bundle.odometry,
            vec![OdometrySample {
                t: 1248272272.841,
                v: 0.1,
                u: 0.05
            }]
        );
    }

    #[test]
    fn malformed_line_reports_file_and_line() {
        let dir = tmpdir("badline");
        write_dataset(
            &dir,
            &[
                ("odometry.dat", "1.0 0.1 0.05\n2.0 bad 0.0\n"),
                ("measurements.dat", ""),
                ("groundtruth.dat", ""),
                ("landmarks.dat", ""),
                ("barcodes.dat", ""),
            ],
        );
        match load_dataset(&dir) {
            Err(Error::DataFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected data format error, got {other:?}"),
        }
    }

    #[test]
    fn barcode_resolution_and_drop_counting() {
        let dir = tmpdir("barcodes");
        write_dataset(
            &dir,
            &[
                ("odometry.dat", "0.0 0 0\n"),
                (
                    "measurements.dat",
                    // barcode 54 -> subject 7 (landmark), barcode 5 -> subject 2 (robot),
                    // barcode 99 unknown
                    "0.1 54 1.0 0.2\n0.2 5 2.0 0.1\n0.3 99 1.5 0.0\n",
                ),
                ("groundtruth.dat", "0.0 0 0 0\n"),
                ("landmarks.dat", "7 1.0 2.0 0.01 0.01\n"),
                ("barcodes.dat", "7 54\n2 5\n"),
            ],
        );
        let bundle = load_dataset(&dir).unwrap();
        assert_eq!(bundle.measurements.len(), 1);
        assert_eq!(bundle.measurements[0].landmark_id, 7);
        assert_eq!(bundle.stats.dropped_unknown_barcode, 1);
        assert_eq!(bundle.stats.dropped_non_landmark, 1);
    }

    #[test]
    fn out_of_order_rows_are_sorted_stably() {
        let dir = tmpdir("sorting");
        write_dataset(
            &dir,
            &[
                ("odometry.dat", "2.0 0.2 0\n1.0 0.1 0\n2.0 0.3 0\n"),
                ("measurements.dat", ""),
                ("groundtruth.dat", "1.0 0 0 0\n"),
                ("landmarks.dat", ""),
                ("barcodes.dat", ""),
            ],
        );
        let bundle = load_dataset(&dir).unwrap();
        let ts: Vec<f64> = bundle.odometry.iter().map(|o| o.t).collect();
        assert_eq!(ts, vec![1.0, 2.0, 2.0]);
        // the two t=2.0 rows keep their file order
        assert_eq!(bundle.odometry[1].v, 0.2);
        assert_eq!(bundle.odometry[2].v, 0.3);
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let scenario = SyntheticScenario::default_diff_drive();
        let bundle = generate_synthetic(&scenario, &NoiseRegime::Gaussian, 7).unwrap();
        let dir_a = tmpdir("roundtrip-a");
        save_dataset(&bundle, &dir_a).unwrap();
        let loaded = load_dataset(&dir_a).unwrap();
        let dir_b = tmpdir("roundtrip-b");
        save_dataset(&loaded, &dir_b).unwrap();
        for name in [
            "odometry.dat",
            "measurements.dat",
            "groundtruth.dat",
            "landmarks.dat",
            "barcodes.dat",
            "manifest.txt",
        ] {
            let a = std::fs::read(dir_a.join(name)).unwrap();
            let b = std::fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "file {name} differs after round trip");
        }
    }

    #[test]
    fn resample_native_rate_passes_through() {
        let scenario = SyntheticScenario::default_diff_drive();
        let bundle = generate_synthetic(&scenario, &NoiseRegime::Gaussian, 3).unwrap();
        let steps = resample(&bundle, scenario.dt).unwrap();
        assert_eq!(steps.len(), scenario.steps + 1);
        for (k, step) in steps.iter().enumerate() {
            let g = &bundle.groundtruth[k];
            assert!((step.truth[0] - g.x).abs() < 1e-12);
            assert!((step.truth[2] - g.theta).abs() < 1e-12);
        }
        let total: usize = steps.iter().map(|s| s.measurements.len()).sum();
        assert_eq!(total, bundle.measurements.len());
    }

    #[test]
    fn measurement_lands_in_exactly_one_bin() {
        let mut bundle = DatasetBundle::default();
        for k in 0..10 {
            bundle.odometry.push(OdometrySample {
                t: k as f64,
                v: 0.0,
                u: 0.0,
            });
            bundle.groundtruth.push(GroundTruthSample {
                t: k as f64,
                x: 0.0,
                y: 0.0,
                theta: 0.0,
            });
        }
        bundle.measurements.push(MeasurementSample {
            t: 3.4,
            landmark_id: 1,
            range: 1.0,
            bearing: 0.0,
        });
        let steps = resample(&bundle, 1.0).unwrap();
        let hits: Vec<usize> = steps
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.measurements.is_empty())
            .map(|(k, _)| k)
            .collect();
        assert_eq!(hits, vec![3]);
    }

    #[test]
    fn yaw_interpolation_crosses_seam_continuously() {
        let gt = vec![
            GroundTruthSample {
                t: 0.0,
                x: 0.0,
                y: 0.0,
                theta: 3.1,
            },
            GroundTruthSample {
                t: 1.0,
                x: 0.0,
                y: 0.0,
                theta: -3.1,
            },
        ];
        // the short way from 3.1 to -3.1 passes through π
        let mid = interpolate_pose(&gt, 0.5).unwrap();
        assert!(
            (mid[2].abs() - PI).abs() < 1e-9,
            "midpoint yaw {} should sit at the seam",
            mid[2]
        );
        let mut prev = interpolate_pose(&gt, 0.0).unwrap()[2];
        for k in 1..=20 {
            let cur = interpolate_pose(&gt, k as f64 / 20.0).unwrap()[2];
            assert!(wrap_angle(cur - prev).abs() < 0.05);
            prev = cur;
        }
    }

    #[test]
    fn reinject_with_identity_laws_reproduces_truth_geometry() {
        let scenario = SyntheticScenario::default_diff_drive();
        let bundle = generate_synthetic(&scenario, &NoiseRegime::Gaussian, 5).unwrap();
        let identity = NoiseRegime::Custom {
            range_factor: Distribution1D::Gaussian {
                mean: 1.0,
                variance: 0.0,
            },
            bearing_offset: Distribution1D::Gaussian {
                mean: 0.0,
                variance: 0.0,
            },
        };
        let clean = reinject_noise(&bundle, &identity, 1).unwrap();
        let map = bundle.landmark_map().unwrap();
        for m in &clean.measurements {
            let pose = interpolate_pose(&bundle.groundtruth, m.t).unwrap();
            let (xl, yl) = map.get(m.landmark_id).unwrap();
            let (r, phi) = models::true_range_bearing(&pose, xl, yl);
            assert!((m.range - r).abs() < 1e-12);
            assert!(wrap_angle(m.bearing - phi).abs() < 1e-12);
        }
    }

    #[test]
    fn reinject_is_seed_reproducible_and_statistically_correct() {
        let scenario = SyntheticScenario {
            steps: 2000,
            measure_every: 1,
            ..SyntheticScenario::default_diff_drive()
        };
        let bundle = generate_synthetic(&scenario, &NoiseRegime::Gaussian, 5).unwrap();
        let regime = NoiseRegime::NonGaussian {
            bearing_limit: DEFAULT_BEARING_LIMIT,
        };
        let a = reinject_noise(&bundle, &regime, 11).unwrap();
        let b = reinject_noise(&bundle, &regime, 11).unwrap();
        assert_eq!(a.measurements, b.measurements);

        // sampled range ratios should match E[vr] = 1 for Exponential(1)
        let map = bundle.landmark_map().unwrap();
        let mut ratios = Vec::new();
        for m in &a.measurements {
            let pose = interpolate_pose(&bundle.groundtruth, m.t).unwrap();
            let (xl, yl) = map.get(m.landmark_id).unwrap();
            let (r, _) = models::true_range_bearing(&pose, xl, yl);
            ratios.push(m.range / r);
        }
        let n = ratios.len() as f64;
        let mean: f64 = ratios.iter().sum::<f64>() / n;
        let se = (1.0 / n).sqrt(); // Var[vr] = 1
        assert!((mean - 1.0).abs() <= 5.0 * se, "ratio mean {mean}");
    }

    #[test]
    fn gaussian_regime_laws_match_by_sampling() {
        let laws = NoiseRegime::Gaussian.measurement_laws().unwrap();
        let mut sampler = SeededSampler::new(2, 0);
        let n = 100_000;
        let (mut sum_r, mut sum_b, mut sumsq_r, mut sumsq_b) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let r = sampler.sample(&laws.range_factor);
            let b = sampler.sample(&laws.bearing_offset);
            sum_r += r;
            sum_b += b;
            sumsq_r += r * r;
            sumsq_b += b * b;
        }
        let nf = n as f64;
        let mean_r = sum_r / nf;
        let var_r = sumsq_r / nf - mean_r * mean_r;
        let mean_b = sum_b / nf;
        let var_b = sumsq_b / nf - mean_b * mean_b;
        assert!((mean_r - 1.0).abs() <= 5.0 * (0.01f64 / nf).sqrt());
        assert!((var_r - 0.01).abs() <= 0.05 * 0.01);
        assert!(mean_b.abs() <= 5.0 * (0.0007f64 / nf).sqrt());
        assert!((var_b - 0.0007).abs() <= 0.05 * 0.0007);
    }

    #[test]
    fn synthetic_zero_noise_matches_deterministic_rollout() {
        let mut scenario = SyntheticScenario::default_diff_drive();
        scenario.speed_disturbance = Distribution1D::Gaussian {
            mean: 0.0,
            variance: 0.0,
        };
        scenario.yaw_rate_disturbance = Distribution1D::Gaussian {
            mean: 0.0,
            variance: 0.0,
        };
        let bundle = generate_synthetic(&scenario, &NoiseRegime::Gaussian, 9).unwrap();
        let model = scenario.dynamics_model().unwrap();
        let mut state = scenario.initial_state.clone();
        for (k, g) in bundle.groundtruth.iter().enumerate() {
            assert!((g.x - state[0]).abs() < 1e-12, "step {k}");
            assert!((g.theta - state[2]).abs() < 1e-12, "step {k}");
            if k < scenario.steps {
                let (v, u) = scenario.input_at(k);
                state = model.eval_dynamics(&state, &[v, u], &[0.0, 0.0]);
            }
        }
    }

    #[test]
    fn synthetic_measurement_count() {
        let scenario = SyntheticScenario::default_diff_drive();
        let bundle = generate_synthetic(&scenario, &NoiseRegime::Gaussian, 1).unwrap();
        let expected = (scenario.steps / scenario.measure_every) * scenario.landmarks.len();
        assert_eq!(bundle.measurements.len(), expected);
    }
}

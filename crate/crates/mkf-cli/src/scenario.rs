//! Synthetic scenario files:
//!
//! ```text
//! [scenario]
//! model = diffdrive        # or `linear`
//! steps = 400
//! dt = 0.1
//! x0 = 0 0 0
//! speed = 1.0
//! u0 = 0.0
//! u_amp = 0.8
//! u_period = 8.0
//! measure_every = 5
//! landmark = 1 4.0 0.0
//! landmark = 2 0.0 4.0
//!
//! [disturbance]
//! wv = gaussian 0 0.01
//! wu = gaussian 0 1.0
//! ```

use anyhow::{anyhow, bail, Context, Result};
use mkf::dataio::{ScenarioKind, SyntheticScenario};

use crate::config::{eval_number, parse_distribution, Config};

pub fn load_scenario(path: &std::path::Path) -> Result<SyntheticScenario> {
    let cfg = Config::load(path)?;
    scenario_from_config(&cfg).with_context(|| format!("in scenario {}", path.display()))
}

pub fn scenario_from_config(cfg: &Config) -> Result<SyntheticScenario> {
    let mut scenario = SyntheticScenario::default_diff_drive();
    match cfg.get("scenario", "model").unwrap_or("diffdrive") {
        "diffdrive" => scenario.kind = ScenarioKind::DiffDrive,
        "linear" => {
            scenario.kind = ScenarioKind::Linear;
            scenario.initial_state = vec![0.0, 0.0];
        }
        other => bail!("unknown scenario model `{other}`"),
    }
    scenario.steps = cfg.usize_or("scenario", "steps", scenario.steps)?;
    scenario.dt = cfg.number_or("scenario", "dt", scenario.dt)?;
    if let Some(x0) = cfg.numbers("scenario", "x0")? {
        scenario.initial_state = x0;
    }
    scenario.speed = cfg.number_or("scenario", "speed", scenario.speed)?;
    scenario.yaw_rate_base = cfg.number_or("scenario", "u0", scenario.yaw_rate_base)?;
    scenario.yaw_rate_amplitude = cfg.number_or("scenario", "u_amp", scenario.yaw_rate_amplitude)?;
    scenario.yaw_rate_period = cfg.number_or("scenario", "u_period", scenario.yaw_rate_period)?;
    scenario.measure_every = cfg.usize_or("scenario", "measure_every", scenario.measure_every)?;

    let landmark_lines = cfg.get_all("scenario", "landmark");
    if !landmark_lines.is_empty() {
        let mut landmarks = Vec::new();
        for line in landmark_lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                bail!("landmark line `{line}` needs `id x y`");
            }
            let id: u32 = fields[0]
                .parse()
                .map_err(|_| anyhow!("invalid landmark id `{}`", fields[0]))?;
            landmarks.push((id, eval_number(fields[1])?, eval_number(fields[2])?));
        }
        scenario.landmarks = landmarks;
    }

    if let Some(text) = cfg.get("disturbance", "wv") {
        scenario.speed_disturbance = parse_distribution(text)?;
    }
    if let Some(text) = cfg.get("disturbance", "wu") {
        scenario.yaw_rate_disturbance = parse_distribution(text)?;
    }
    Ok(scenario)
}

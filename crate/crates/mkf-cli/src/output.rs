//! Deterministic run outputs: a manifest echoing the resolved configuration,
//! per-filter trajectory CSVs, and JSON summaries. All maps are ordered and
//! floats use shortest round-trip formatting, so a fixed seed reproduces
//! byte-identical files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::runner::{FilterRun, RunModel};
use mkf::dataio::TimeStep;

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub settings: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            settings: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.settings.insert(key.to_string(), value.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)
            .with_context(|| format!("writing manifest in {}", dir.display()))?;
        Ok(())
    }
}

#[derive(Serialize)]
pub struct FilterSummary {
    pub mean_position_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_yaw_error: Option<f64>,
    pub measurement_updates: usize,
}

#[derive(Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub filters: BTreeMap<String, FilterSummary>,
}

pub fn write_summary(dir: &Path, runs: &BTreeMap<&'static str, FilterRun>, steps: usize) -> Result<()> {
    let summary = RunSummary {
        steps,
        filters: runs
            .iter()
            .map(|(name, run)| {
                (
                    name.to_string(),
                    FilterSummary {
                        mean_position_error: run.metrics.mean_position_error,
                        mean_yaw_error: run.metrics.mean_yaw_error,
                        measurement_updates: run.updates,
                    },
                )
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

pub fn write_trajectories(
    dir: &Path,
    model: &RunModel,
    steps: &[TimeStep],
    runs: &BTreeMap<&'static str, FilterRun>,
) -> Result<()> {
    let names = model.state_names();
    for (filter, run) in runs {
        let mut csv = String::from("t");
        for n in names {
            csv.push_str(&format!(",truth_{n}"));
        }
        for n in names {
            csv.push_str(&format!(",est_{n}"));
        }
        for n in names {
            csv.push_str(&format!(",var_{n}"));
        }
        csv.push('\n');
        for (step, est) in steps.iter().zip(&run.estimates) {
            csv.push_str(&format!("{}", est.t));
            for i in 0..names.len() {
                csv.push_str(&format!(",{}", step.truth.get(i).copied().unwrap_or(0.0)));
            }
            for v in &est.mean {
                csv.push_str(&format!(",{v}"));
            }
            for v in &est.var_diag {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        std::fs::write(dir.join(format!("trajectory_{filter}.csv")), csv)?;
    }
    Ok(())
}

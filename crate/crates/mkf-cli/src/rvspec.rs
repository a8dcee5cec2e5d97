//! Random-vector specification files for the `moment` subcommand:
//!
//! ```text
//! [gaussian]
//! names = x th
//! mean = 10.0 pi/3
//! cov_row = 5.0 1.5
//! cov_row = 1.5 pi/6
//!
//! [independent]
//! x = exponential 1.0
//! th = uniform -pi/3 pi/6
//! ```
//!
//! Either section may be omitted.

use anyhow::{anyhow, bail, Context, Result};
use mkf::expand::{GaussianBlock, RandomVectorSpec};
use mkf::linalg::SymMatrix;

use crate::config::{eval_number, parse_distribution, Config};

pub fn load_rv_spec(path: &std::path::Path) -> Result<RandomVectorSpec> {
    let cfg = Config::load(path)?;
    rv_from_config(&cfg).with_context(|| format!("in rv spec {}", path.display()))
}

pub fn rv_from_config(cfg: &Config) -> Result<RandomVectorSpec> {
    let gaussian = if cfg.has_section("gaussian") {
        let names: Vec<String> = cfg
            .get("gaussian", "names")
            .ok_or_else(|| anyhow!("[gaussian] section needs `names`"))?
            .split_whitespace()
            .map(|s| s.to_string())
            .collect();
        let mean = cfg
            .numbers("gaussian", "mean")?
            .ok_or_else(|| anyhow!("[gaussian] section needs `mean`"))?;
        let rows: Vec<Vec<f64>> = cfg
            .get_all("gaussian", "cov_row")
            .iter()
            .map(|row| {
                row.split_whitespace()
                    .map(eval_number)
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        if rows.len() != names.len() {
            bail!(
                "[gaussian] has {} names but {} cov_row lines",
                names.len(),
                rows.len()
            );
        }
        Some(GaussianBlock {
            names,
            mean,
            cov: SymMatrix::from_rows(&rows).map_err(|e| anyhow!("{e}"))?,
        })
    } else {
        None
    };

    let mut independent = Vec::new();
    if cfg.has_section("independent") {
        for (key, value) in independent_entries(cfg) {
            independent.push((key, parse_distribution(&value)?));
        }
    }
    RandomVectorSpec::new(gaussian, independent).map_err(|e| anyhow!("{e}"))
}

fn independent_entries(cfg: &Config) -> Vec<(String, String)> {
    // every key in [independent] is a variable name
    let mut out = Vec::new();
    for key in cfg.section_keys("independent") {
        if let Some(v) = cfg.get("independent", &key) {
            out.push((key, v.to_string()));
        }
    }
    out
}

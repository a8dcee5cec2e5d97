//! `mkf moment`: evaluates moment queries over a random vector through the
//! comparison stack — mean substitution ("linear"), the unscented transform,
//! the correlation-ignoring per-component path, the exact propagation, and an
//! optional Monte Carlo column.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;

use mkf::expand::{
    expectation, expectation_ignoring_correlations, mean_substitution, RandomVectorSpec,
};
use mkf::expr::{parse, MomentExpr};
use mkf::filters::{unscented_expectation, UkfParams};
use mkf::mc::mc_expectation;

use crate::output::Manifest;
use crate::rvspec::load_rv_spec;

#[derive(Args, Debug)]
pub struct MomentArgs {
    /// Expression to evaluate (repeatable)
    #[arg(long = "expr", required = true)]
    pub exprs: Vec<String>,
    /// Random-vector spec file
    #[arg(long)]
    pub rv: PathBuf,
    /// Add a Monte Carlo column with this many samples
    #[arg(long)]
    pub mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for moments.csv and manifest.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Row {
    expr: String,
    linear: f64,
    ut: f64,
    original: f64,
    extended: f64,
    mc: Option<(f64, f64)>,
}

fn evaluate(args: &MomentArgs, rv: &RandomVectorSpec) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for text in &args.exprs {
        let e = parse(text).map_err(|e| anyhow!("--expr `{text}`: {e}"))?;
        let exprs: Vec<MomentExpr> = vec![e.clone()];
        let ut = unscented_expectation(&exprs, rv, &UkfParams::default())
            .map_err(|e| anyhow!("{e}"))?[0];
        let mc = match args.mc {
            None => None,
            Some(n) => {
                let est = mc_expectation(&e, rv, n, args.seed).map_err(|e| anyhow!("{e}"))?;
                Some((est.value, est.std_error))
            }
        };
        rows.push(Row {
            expr: text.clone(),
            linear: mean_substitution(&e, rv).map_err(|e| anyhow!("{e}"))?,
            ut,
            original: expectation_ignoring_correlations(&e, rv).map_err(|e| anyhow!("{e}"))?,
            extended: expectation(&e, rv).map_err(|e| anyhow!("{e}"))?,
            mc,
        });
    }
    Ok(rows)
}

pub fn run(args: &MomentArgs) -> Result<()> {
    let rv = load_rv_spec(&args.rv)?;
    let rows = evaluate(args, &rv)?;

    let mc_header = if args.mc.is_some() {
        format!("  {:>14}  {:>14}", "mc", "mc_std_error")
    } else {
        String::new()
    };
    println!(
        "{:<28}  {:>14}  {:>14}  {:>14}  {:>14}{}",
        "expression", "linear", "ut", "original_emp", "extended_emp", mc_header
    );
    for row in &rows {
        let mc_cols = match row.mc {
            Some((v, se)) => format!("  {v:>14.6}  {se:>14.3e}"),
            None => String::new(),
        };
        println!(
            "{:<28}  {:>14.6}  {:>14.6}  {:>14.6}  {:>14.6}{}",
            row.expr, row.linear, row.ut, row.original, row.extended, mc_cols
        );
    }

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("expression,linear,ut,original_emp,extended_emp");
        if args.mc.is_some() {
            csv.push_str(",mc,mc_std_error");
        }
        csv.push('\n');
        for row in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{}",
                row.expr, row.linear, row.ut, row.original, row.extended
            ));
            if let Some((v, se)) = row.mc {
                csv.push_str(&format!(",{v},{se}"));
            }
            csv.push('\n');
        }
        std::fs::write(dir.join("moments.csv"), csv)?;

        let mut manifest = Manifest::new("moment", args.seed);
        manifest.set("rv", args.rv.display());
        manifest.set("exprs", args.exprs.join("; "));
        if let Some(n) = args.mc {
            manifest.set("mc_samples", n);
        }
        manifest.write(dir)?;
    }
    Ok(())
}

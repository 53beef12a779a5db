use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use driverse_core::gae::{gae_report, PoseTrajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::output::{create_dir, Ctx};
use crate::ReportArg;

const EST_SUFFIX: &str = ".est.tum";
const GT_SUFFIX: &str = ".gt.tum";

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated trajectory (TUM text).
    #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
    est: Option<PathBuf>,
    /// Ground-truth trajectory (TUM text).
    #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
    gt: Option<PathBuf>,
    /// Directory of NAME.est.tum / NAME.gt.tum pairs evaluated concurrently.
    #[arg(long)]
    batch: Option<PathBuf>,
    /// Where batch reports (NAME.gae.json) go; defaults to the batch directory.
    #[arg(long, requires = "batch")]
    out_dir: Option<PathBuf>,
    /// Frame rate recorded in the report (Hz).
    #[arg(long)]
    frame_rate: Option<f64>,
    #[command(flatten)]
    report: ReportArg,
}

fn evaluate(est: &Path, gt: &Path, frame_rate: f64) -> Result<driverse_core::gae::GaeReport> {
    let e = PoseTrajectory::read_tum(est).with_context(|| format!("reading {}", est.display()))?;
    let g = PoseTrajectory::read_tum(gt).with_context(|| format!("reading {}", gt.display()))?;
    Ok(gae_report(&e, &g, frame_rate)?)
}

#[derive(Serialize)]
struct BatchEntry {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct BatchReport {
    pairs: usize,
    failed: usize,
    results: Vec<BatchEntry>,
}

fn batch_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let file = entry?.file_name();
        if let Some(stem) = file.to_str().and_then(|n| n.strip_suffix(EST_SUFFIX)) {
            names.push(stem.to_string());
        }
    }
    names.sort();
    if names.is_empty() {
        bail!("no *{EST_SUFFIX} files in {}", dir.display());
    }
    Ok(names)
}

pub fn eval(a: &EvalArgs, cfg: &Config, ctx: &Ctx) -> Result<()> {
    let frame_rate = a.frame_rate.unwrap_or(cfg.gae.frame_rate);
    let Some(dir) = &a.batch else {
        let (est, gt) = (a.est.as_deref().unwrap(), a.gt.as_deref().unwrap());
        return ctx.report(&evaluate(est, gt, frame_rate)?, a.report.report.as_deref());
    };

    let out_dir = a.out_dir.clone().unwrap_or_else(|| dir.clone());
    create_dir(&out_dir)?;
    let names = batch_names(dir)?;
    let results: Vec<BatchEntry> = names
        .par_iter()
        .map(|name| {
            let est = dir.join(format!("{name}{EST_SUFFIX}"));
            let gt = dir.join(format!("{name}{GT_SUFFIX}"));
            let outcome = evaluate(&est, &gt, frame_rate).and_then(|r| {
                ctx.report(&r, Some(&out_dir.join(format!("{name}.gae.json"))))?;
                Ok(r.gae)
            });
            match outcome {
                Ok(gae) => BatchEntry { name: name.clone(), gae: Some(gae), error: None },
                Err(e) => BatchEntry { name: name.clone(), gae: None, error: Some(format!("{e:#}")) },
            }
        })
        .collect();
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    let summary = BatchReport {
        pairs: results.len(),
        failed,
        results,
    };
    ctx.report(&summary, a.report.report.as_deref())?;
    if failed > 0 {
        bail!("{failed} of {} pairs failed", summary.pairs);
    }
    Ok(())
}

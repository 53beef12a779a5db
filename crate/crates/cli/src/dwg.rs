use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use driverse_core::dwg::{plan_windows, PlanParams};
use driverse_core::manifest::SceneManifest;

use crate::anchors::TsaArgs;
use crate::config::Config;
use crate::output::Ctx;
use crate::ReportArg;

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Scene manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Frames per generation window.
    #[arg(long)]
    window: Option<usize>,
    /// Minimum fraction of initial anchors that must stay visible.
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    tsa: TsaArgs,
    #[command(flatten)]
    report: ReportArg,
}

pub fn plan(a: &PlanArgs, cfg: &Config, ctx: &Ctx) -> Result<()> {
    let m = SceneManifest::ingest(&a.manifest)?;
    let (tsa, region, seed) = a.tsa.resolve(cfg);
    let params = PlanParams {
        window: a.window.unwrap_or(cfg.dwg.window),
        threshold: a.threshold.unwrap_or(cfg.dwg.threshold),
        tsa,
        region,
        seed,
    };
    let plan = plan_windows(&m.poses, &m.intrinsics, &params)?;
    ctx.report(&plan, a.report.report.as_deref())
}

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use driverse_core::manifest::SceneManifest;
use driverse_core::tsa::{
    generate_anchors, project_sequence, render_frame, AnchorFrameProjection, AnchorRegion, AnchorSet, TsaConfig,
};
use serde::Serialize;

use crate::config::Config;
use crate::output::{create_dir, Ctx};
use crate::ReportArg;

/// Anchor and trail settings shared by every command that projects anchors.
#[derive(Debug, Clone, Args)]
pub struct TsaArgs {
    /// Trail decay rate (1/px).
    #[arg(long)]
    lambda: Option<f64>,
    /// Trail length (frames).
    #[arg(long)]
    trail_depth: Option<usize>,
    /// Disc radius (px).
    #[arg(long)]
    point_radius: Option<f64>,
    /// Number of anchors sampled (re-drawn for every planned window).
    #[arg(long)]
    anchor_count: Option<usize>,
    /// Inner radius of the anchor annulus (m).
    #[arg(long)]
    radius_min: Option<f64>,
    /// Outer radius of the anchor annulus (m).
    #[arg(long)]
    radius_max: Option<f64>,
    /// Height of the anchor plane (m).
    #[arg(long, allow_hyphen_values = true)]
    anchor_height: Option<f64>,
    /// Anchor placement seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl TsaArgs {
    pub fn resolve(&self, cfg: &Config) -> (TsaConfig, AnchorRegion, u64) {
        let d = &cfg.tsa;
        let tsa = TsaConfig {
            lambda: self.lambda.unwrap_or(d.lambda),
            trail_depth: self.trail_depth.unwrap_or(d.trail_depth),
            point_radius: self.point_radius.unwrap_or(d.point_radius),
            anchor_count: self.anchor_count.unwrap_or(d.anchor_count),
        };
        let region = AnchorRegion {
            radius_min: self.radius_min.unwrap_or(d.radius_min),
            radius_max: self.radius_max.unwrap_or(d.radius_max),
            height: self.anchor_height.unwrap_or(d.anchor_height),
        };
        (tsa, region, self.seed.unwrap_or(d.seed))
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Scene manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Directory receiving frame_00000.ppm, frame_00001.ppm, ...
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    tsa: TsaArgs,
    #[command(flatten)]
    report: ReportArg,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// Scene manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    tsa: TsaArgs,
    #[command(flatten)]
    report: ReportArg,
}

struct Projected {
    anchors: AnchorSet,
    frames: Vec<AnchorFrameProjection>,
    v_max: f64,
    tsa: TsaConfig,
    manifest: SceneManifest,
}

fn project(manifest: &PathBuf, args: &TsaArgs, cfg: &Config) -> Result<Projected> {
    let m = SceneManifest::ingest(manifest)?;
    let (tsa, region, seed) = args.resolve(cfg);
    tsa.validate()?;
    let anchors = generate_anchors(&m.poses[0], &tsa, &region, seed)?;
    let seq = project_sequence(&anchors, &m.poses, &m.intrinsics, &tsa)?;
    Ok(Projected {
        anchors,
        frames: seq.frames,
        v_max: seq.v_max,
        tsa,
        manifest: m,
    })
}

#[derive(Serialize)]
struct RenderReport {
    frames: usize,
    width: u32,
    height: u32,
    v_max: f64,
    seed: u64,
    files: Vec<String>,
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:05}.ppm")
}

pub fn render(a: &RenderArgs, cfg: &Config, ctx: &Ctx) -> Result<()> {
    let p = project(&a.manifest, &a.tsa, cfg)?;
    let (w, h) = (p.manifest.intrinsics.width, p.manifest.intrinsics.height);
    create_dir(&a.out_dir)?;
    let mut files = Vec::with_capacity(p.frames.len());
    for f in &p.frames {
        let name = frame_name(f.frame);
        render_frame(f, &p.tsa, w, h)?.write_ppm(a.out_dir.join(&name))?;
        files.push(name);
    }
    let report = RenderReport {
        frames: p.frames.len(),
        width: w,
        height: h,
        v_max: p.v_max,
        seed: p.anchors.seed,
        files,
    };
    ctx.report(&report, a.report.report.as_deref())
}

#[derive(Serialize)]
struct DumpReport<'a> {
    seed: u64,
    region: AnchorRegion,
    tsa: TsaConfig,
    /// World positions of the anchors, indexed by anchor id.
    anchors: Vec<[f64; 3]>,
    v_max: f64,
    frames: &'a [AnchorFrameProjection],
}

pub fn dump(a: &DumpArgs, cfg: &Config, ctx: &Ctx) -> Result<()> {
    let p = project(&a.manifest, &a.tsa, cfg)?;
    let report = DumpReport {
        seed: p.anchors.seed,
        region: p.anchors.region,
        tsa: p.tsa,
        anchors: p.anchors.anchors.iter().map(|x| [x.x, x.y, x.z]).collect(),
        v_max: p.v_max,
        frames: &p.frames,
    };
    ctx.report(&report, a.report.report.as_deref())
}

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::Args;
use driverse_core::gae::PoseTrajectory;
use driverse_core::lma::LatentSequence;
use driverse_core::manifest::{LatentRef, SceneManifest};
use driverse_core::synth::{default_intrinsics, gen_scene, gen_scene_tracks, ScenarioKind, ScenarioSpec, SceneOptions};
use driverse_core::Intrinsics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::output::{create_dir, Ctx};
use crate::ReportArg;

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory for manifest.json, gt.tum and tracks.json.
    #[arg(long)]
    out: PathBuf,
    /// straight, arc_turn, u_turn, lane_change or stop_and_go.
    #[arg(long)]
    kind: Option<String>,
    /// Ego speed (m/s).
    #[arg(long)]
    speed: Option<f64>,
    /// Scene length (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Frames per second.
    #[arg(long)]
    frame_rate: Option<f64>,
    /// Total heading change for arc turns (degrees, positive = left); its
    /// sign picks the side of a lane change.
    #[arg(long, allow_hyphen_values = true)]
    turn_angle: Option<f64>,
    /// Scene seed (anchors, dynamic objects, latents).
    #[arg(long)]
    seed: Option<u64>,
    /// Image size as WIDTHxHEIGHT; the default camera is scaled to fit.
    #[arg(long, value_parser = parse_size)]
    image_size: Option<(u32, u32)>,
    /// Number of independently moving objects.
    #[arg(long)]
    dynamic_objects: Option<usize>,
    /// Anchors used for the static point tracks.
    #[arg(long)]
    anchor_count: Option<usize>,
    /// Also write a random latent sequence with this many channels.
    #[arg(long)]
    latent_channels: Option<usize>,
    #[command(flatten)]
    report: ReportArg,
}

pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("image size must be non-zero, got {s:?}"));
    }
    Ok((w, h))
}

fn scaled_intrinsics(size: Option<(u32, u32)>) -> Result<Intrinsics> {
    let k = default_intrinsics();
    let Some((w, h)) = size else {
        return Ok(k);
    };
    let sx = f64::from(w) / f64::from(k.width);
    let sy = f64::from(h) / f64::from(k.height);
    Ok(Intrinsics::new(k.fx * sx, k.fy * sy, f64::from(w) / 2.0, f64::from(h) / 2.0, w, h)?)
}

fn random_latents(frames: usize, channels: usize, k: &Intrinsics, stride: f64, seed: u64) -> Result<LatentSequence> {
    let cells = |px: u32| ((f64::from(px) - 1.0) / stride).ceil() as usize + 1;
    let (h, w) = (cells(k.height), cells(k.width));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a7e_0000);
    let data = (0..frames * channels * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(LatentSequence::new(frames, channels, h, w, stride, data)?)
}

#[derive(Serialize)]
struct GenReport {
    kind: ScenarioKind,
    frames: usize,
    frame_rate: f64,
    seed: u64,
    anchors: usize,
    tracks: usize,
    files: Vec<String>,
}

pub fn gen(a: &GenArgs, cfg: &Config, ctx: &Ctx) -> Result<()> {
    let d = &cfg.synth;
    let kind: ScenarioKind = a
        .kind
        .as_deref()
        .unwrap_or(&d.kind)
        .parse()
        .map_err(|e: driverse_core::Error| anyhow!(e))?;
    let mut spec = ScenarioSpec::new(
        kind,
        a.speed.unwrap_or(d.speed),
        a.duration.unwrap_or(d.duration),
        a.frame_rate.unwrap_or(d.frame_rate),
    );
    if let Some(t) = a.turn_angle {
        spec.turn_angle = t;
    }
    spec.seed = a.seed.unwrap_or(d.seed);

    let mut tsa = cfg.tsa.tsa();
    if let Some(n) = a.anchor_count {
        tsa.anchor_count = n;
    }
    let opts = SceneOptions {
        intrinsics: scaled_intrinsics(a.image_size)?,
        tsa,
        region: cfg.tsa.region(),
        dynamic_objects: a.dynamic_objects.unwrap_or(d.dynamic_objects),
    };
    let scene = gen_scene(&spec, &opts)?;
    let tracks = gen_scene_tracks(&scene);

    create_dir(&a.out)?;
    let mut files = vec!["manifest.json".to_string(), "gt.tum".into(), "tracks.json".into()];
    let mut manifest = SceneManifest::from_scene(&scene);
    manifest.tracks = Some("tracks.json".into());
    tracks.write(a.out.join("tracks.json"))?;
    PoseTrajectory::from_positions(scene.camera_positions()).write_tum(a.out.join("gt.tum"))?;

    let channels = a.latent_channels.unwrap_or(d.latent_channels);
    if channels > 0 {
        if cfg.lma.stride <= 0.0 {
            bail!("lma.stride must be > 0");
        }
        let latents = random_latents(scene.frame_count(), channels, &scene.intrinsics, cfg.lma.stride, spec.seed)?;
        latents.write(a.out.join("latents.bin"), a.out.join("latents.json"))?;
        manifest.latents = Some(LatentRef {
            data: "latents.bin".into(),
            meta: "latents.json".into(),
        });
        files.extend(["latents.bin".to_string(), "latents.json".into()]);
    }
    manifest.write(a.out.join("manifest.json"))?;

    let report = GenReport {
        kind,
        frames: scene.frame_count(),
        frame_rate: spec.frame_rate,
        seed: spec.seed,
        anchors: scene.anchors.len(),
        tracks: tracks.len(),
        files,
    };
    ctx.report(&report, a.report.report.as_deref())
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use driverse_core::lma::{
    consistency_loss, consistency_loss_grad, motion_weights, sample_dynamic_points, LatentMeta, LatentSequence,
    TrackSet,
};
use driverse_core::manifest::SceneManifest;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::config::Config;
use crate::output::Ctx;
use crate::ReportArg;

/// Track and latent inputs, either listed in a manifest or given directly.
#[derive(Debug, Args)]
pub struct Inputs {
    /// Manifest referencing tracks and latents.
    #[arg(long, required_unless_present_all = ["tracks", "latents", "latents_meta"])]
    manifest: Option<PathBuf>,
    /// Track file (overrides the manifest's).
    #[arg(long)]
    tracks: Option<PathBuf>,
    /// Raw little-endian f32 latents (overrides the manifest's).
    #[arg(long)]
    latents: Option<PathBuf>,
    /// Latent shape description (overrides the manifest's).
    #[arg(long)]
    latents_meta: Option<PathBuf>,
    /// Pixels per latent cell; replaces the value in the latent description.
    #[arg(long)]
    stride: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Minimum total displacement (px) for a track to count as dynamic.
    #[arg(long)]
    motion_threshold: Option<f64>,
    /// Number of dynamic tracks to sample.
    #[arg(long)]
    count: Option<usize>,
    /// Sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    report: ReportArg,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Central difference step.
    #[arg(long)]
    step: Option<f64>,
    /// Largest acceptable relative error.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Upper bound on checked latent entries (a seeded subset beyond it).
    #[arg(long)]
    max_entries: Option<usize>,
    /// Seed for choosing the checked subset.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    report: ReportArg,
}

fn load_latents(data: &Path, meta: &Path, stride_default: f64, stride_flag: Option<f64>) -> Result<LatentSequence> {
    let text = std::fs::read_to_string(meta).with_context(|| format!("reading {}", meta.display()))?;
    let mut value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", meta.display()))?;
    let Some(obj) = value.as_object_mut() else {
        bail!("{}: expected a JSON object", meta.display());
    };
    if let Some(s) = stride_flag {
        obj.insert("stride".into(), s.into());
    } else {
        obj.entry("stride").or_insert(stride_default.into());
    }
    let meta: LatentMeta = serde_json::from_value(value).with_context(|| format!("invalid {}", meta.display()))?;
    let bytes = std::fs::read(data).with_context(|| format!("reading {}", data.display()))?;
    Ok(LatentSequence::from_f32_le(&meta, &bytes)?)
}

fn load(inputs: &Inputs, cfg: &Config) -> Result<(TrackSet, LatentSequence)> {
    let manifest = inputs.manifest.as_ref().map(SceneManifest::ingest).transpose()?;
    let from_manifest = |what: &str, pick: &dyn Fn(&SceneManifest) -> Option<String>| -> Result<PathBuf> {
        match &manifest {
            Some(m) => match pick(m) {
                Some(rel) => Ok(m.resolve(&rel)),
                None => bail!("manifest has no {what}; pass --{what}"),
            },
            None => bail!("--{what} is required without --manifest"),
        }
    };
    let tracks_path = match &inputs.tracks {
        Some(p) => p.clone(),
        None => from_manifest("tracks", &|m| m.tracks.clone())?,
    };
    let data = match &inputs.latents {
        Some(p) => p.clone(),
        None => from_manifest("latents", &|m| m.latents.as_ref().map(|l| l.data.clone()))?,
    };
    let meta = match &inputs.latents_meta {
        Some(p) => p.clone(),
        None => from_manifest("latents-meta", &|m| m.latents.as_ref().map(|l| l.meta.clone()))?,
    };
    let tracks = TrackSet::read(&tracks_path)?;
    let latents = load_latents(&data, &meta, cfg.lma.stride, inputs.stride)?;
    Ok((tracks, latents))
}

#[derive(Serialize)]
struct LossReport {
    loss: f64,
    stride: f64,
    tracks_total: usize,
    tracks_sampled: usize,
    track_ids: Vec<u64>,
    weights: Vec<f64>,
}

pub fn loss(a: &LossArgs, cfg: &Config, ctx: &Ctx) -> Result<()> {
    let (tracks, latents) = load(&a.inputs, cfg)?;
    let d = &cfg.lma;
    let sampled = sample_dynamic_points(
        &tracks,
        a.motion_threshold.unwrap_or(d.motion_threshold),
        a.count.unwrap_or(d.sample_count),
        a.seed.unwrap_or(d.seed),
    )?;
    let weights = motion_weights(&sampled)?;
    let loss = consistency_loss(&latents, &sampled, &weights)?;
    let report = LossReport {
        loss,
        stride: latents.stride(),
        tracks_total: tracks.len(),
        tracks_sampled: sampled.len(),
        track_ids: sampled.tracks.iter().map(|t| t.id).collect(),
        weights: weights.w,
    };
    ctx.report(&report, a.report.report.as_deref())
}

#[derive(Serialize)]
struct GradcheckReport {
    max_relative_error: f64,
    worst_entry: Option<usize>,
    step: f64,
    tolerance: f64,
    checked: usize,
    entries: usize,
    tracks: usize,
    pass: bool,
}

/// Relative deviation with an absolute floor for near-zero components.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn gradcheck(a: &GradcheckArgs, cfg: &Config, ctx: &Ctx) -> Result<()> {
    let (tracks, latents) = load(&a.inputs, cfg)?;
    let d = &cfg.lma;
    let h = a.step.unwrap_or(d.gradcheck_step);
    let tolerance = a.tolerance.unwrap_or(d.gradcheck_tolerance);
    if !(h > 0.0 && h.is_finite()) {
        bail!("step must be > 0, got {h}");
    }
    let weights = motion_weights(&tracks)?;
    let grad = consistency_loss_grad(&latents, &tracks, &weights)?;

    let total = latents.data().len();
    let limit = a.max_entries.unwrap_or(d.gradcheck_max_entries).max(1);
    let entries: Vec<usize> = if total <= limit {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(d.seed));
        let mut idx = rand::seq::index::sample(&mut rng, total, limit).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut probe = latents.clone();
    let mut worst = (0.0f64, None);
    for &i in &entries {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = consistency_loss(&probe, &tracks, &weights)?;
        probe.data_mut()[i] = orig - h;
        let minus = consistency_loss(&probe, &tracks, &weights)?;
        probe.data_mut()[i] = orig;
        let err = relative_error(grad.data()[i], (plus - minus) / (2.0 * h));
        if err > worst.0 || worst.1.is_none() {
            worst = (err, Some(i));
        }
    }
    let report = GradcheckReport {
        max_relative_error: worst.0,
        worst_entry: worst.1,
        step: h,
        tolerance,
        checked: entries.len(),
        entries: total,
        tracks: tracks.len(),
        pass: worst.0 < tolerance,
    };
    ctx.report(&report, a.report.report.as_deref())?;
    if !report.pass {
        bail!(
            "gradient check failed: relative error {} at entry {:?} exceeds {tolerance}",
            report.max_relative_error,
            report.worst_entry
        );
    }
    Ok(())
}

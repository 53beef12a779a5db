//! Trajectory-guided spatial anchors.
//!
//! Static ground anchors are scattered around the first ego position,
//! projected through every pose, and turned into fading trails, motion
//! vectors and flow-wheel colors that can be rasterized as control frames.

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, Intrinsics, Pixel, RigidTransform};
use crate::raster::Raster;

/// Percentile of observed motion magnitudes that saturates the color wheel.
pub const V_MAX_PERCENTILE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsaConfig {
    /// Trail decay rate λ (1/px).
    pub lambda: f64,
    /// Trail depth M (frames).
    pub trail_depth: usize,
    /// Rendered disc radius (px).
    pub point_radius: f64,
    /// Anchor count K.
    pub anchor_count: usize,
}

impl Default for TsaConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            trail_depth: 4,
            point_radius: 2.0,
            anchor_count: 1024,
        }
    }
}

impl TsaConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            problems.push(format!("lambda must be > 0, got {}", self.lambda));
        }
        if self.anchor_count == 0 {
            problems.push("anchor_count must be >= 1".to_string());
        }
        if !(self.point_radius > 0.0 && self.point_radius.is_finite()) {
            problems.push(format!("point_radius must be > 0, got {}", self.point_radius));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}

/// Ground-plane annulus the anchors are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorRegion {
    pub radius_min: f64,
    pub radius_max: f64,
    /// World z of every anchor (m).
    pub height: f64,
}

impl Default for AnchorRegion {
    fn default() -> Self {
        Self {
            radius_min: 3.0,
            radius_max: 60.0,
            height: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub anchors: Vec<Point3<f64>>,
    pub seed: u64,
    pub region: AnchorRegion,
    /// Horizontal center the annulus was drawn around.
    pub center: [f64; 2],
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Samples `cfg.anchor_count` anchors uniformly by area in the annulus around
/// the camera center of `ego_pose_0`.
pub fn generate_anchors(
    ego_pose_0: &RigidTransform,
    cfg: &TsaConfig,
    region: &AnchorRegion,
    seed: u64,
) -> Result<AnchorSet> {
    if cfg.anchor_count == 0 {
        return Err(Error::InvalidParameter("anchor_count must be >= 1".into()));
    }
    if !(region.radius_min >= 0.0 && region.radius_max > region.radius_min && region.radius_max.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "need radius_max > radius_min >= 0, got [{}, {}]",
            region.radius_min, region.radius_max
        )));
    }
    let c = ego_pose_0.camera_center();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_min2 = region.radius_min * region.radius_min;
    let span = region.radius_max * region.radius_max - r_min2;
    let anchors = (0..cfg.anchor_count)
        .map(|_| {
            let u: f64 = rng.random();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let r = (u * span + r_min2)
                .sqrt()
                .clamp(region.radius_min, region.radius_max);
            let (s, co) = phi.sin_cos();
            Point3::new(c.x + r * co, c.y + r * s, region.height)
        })
        .collect();
    Ok(AnchorSet {
        anchors,
        seed,
        region: *region,
        center: [c.x, c.y],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailPoint {
    /// Frames back from the current one (1..=M).
    pub age: usize,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorState {
    pub id: usize,
    /// Projected pixel; absent when the anchor lies on the camera plane.
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub depth: Option<f64>,
    pub in_bounds: bool,
    pub trail: Vec<TrailPoint>,
    /// Pixel displacement since the previous frame (px/frame).
    pub motion: Option<[f64; 2]>,
    pub color: [u8; 3],
}

impl AnchorState {
    pub fn pixel(&self) -> Option<Pixel> {
        Some(Pixel::new(self.u?, self.v?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorFrameProjection {
    pub frame: usize,
    pub anchors: Vec<AnchorState>,
}

impl AnchorFrameProjection {
    pub fn visible_count(&self) -> usize {
        self.anchors.iter().filter(|a| a.in_bounds).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSequence {
    pub frames: Vec<AnchorFrameProjection>,
    /// Motion magnitude mapped to full color saturation.
    pub v_max: f64,
}

/// Pixel of a projection usable for trails and motion (strictly in front of the camera).
fn front_pixel(p: &Result<crate::geometry::Projection>) -> Option<Pixel> {
    match p {
        Ok(p) if p.depth > 0.0 => Some(p.pixel),
        _ => None,
    }
}

/// Projects static anchors through each pose and derives trails, motion and colors.
pub fn project_sequence(
    anchors: &AnchorSet,
    poses: &[RigidTransform],
    k: &Intrinsics,
    cfg: &TsaConfig,
) -> Result<ProjectionSequence> {
    if poses.is_empty() {
        return Err(Error::InvalidParameter("pose sequence is empty".into()));
    }
    cfg.validate()?;
    k.validate()?;

    let raw: Vec<Vec<Result<crate::geometry::Projection>>> = poses
        .iter()
        .map(|pose| {
            let cfw = pose.to_camera_from_world();
            anchors.anchors.iter().map(|x| project(x, &cfw, k)).collect()
        })
        .collect();

    let mut frames = Vec::with_capacity(poses.len());
    for (t, row) in raw.iter().enumerate() {
        let states = row
            .iter()
            .enumerate()
            .map(|(j, proj)| {
                let current = front_pixel(proj);
                let trail = match current {
                    Some(cur) => (1..=cfg.trail_depth.min(t))
                        .filter_map(|m| {
                            let past = front_pixel(&raw[t - m][j])?;
                            let alpha = trail_alpha(cfg.lambda, cur.distance(&past));
                            // fully faded (underflowed) entries are dropped
                            (alpha > 0.0).then_some(TrailPoint {
                                age: m,
                                u: past.u,
                                v: past.v,
                                alpha,
                            })
                        })
                        .collect(),
                    None => Vec::new(),
                };
                let motion = match (t, current) {
                    (t, Some(cur)) if t > 0 => {
                        front_pixel(&raw[t - 1][j]).map(|prev| [cur.u - prev.u, cur.v - prev.v])
                    }
                    _ => None,
                };
                let (u, v, depth, in_bounds) = match proj {
                    Ok(p) => (Some(p.pixel.u), Some(p.pixel.v), Some(p.depth), p.in_bounds),
                    Err(_) => (None, None, None, false),
                };
                AnchorState {
                    id: j,
                    u,
                    v,
                    depth,
                    in_bounds,
                    trail,
                    motion,
                    color: [255, 255, 255],
                }
            })
            .collect();
        frames.push(AnchorFrameProjection { frame: t, anchors: states });
    }

    let v_max = motion_percentile(&frames, V_MAX_PERCENTILE);
    for f in &mut frames {
        for a in &mut f.anchors {
            a.color = motion_color(a.motion.unwrap_or([0.0, 0.0]), v_max);
        }
    }
    Ok(ProjectionSequence { frames, v_max })
}

/// Trail opacity `exp(−λ·δ)` for pixel displacement δ.
pub fn trail_alpha(lambda: f64, displacement: f64) -> f64 {
    (-lambda * displacement).exp()
}

/// Nearest-rank percentile of in-bounds motion magnitudes; 1.0 when there is no motion.
fn motion_percentile(frames: &[AnchorFrameProjection], q: f64) -> f64 {
    let mut mags: Vec<f64> = frames
        .iter()
        .flat_map(|f| f.anchors.iter())
        .filter(|a| a.in_bounds)
        .filter_map(|a| a.motion.map(|m| m[0].hypot(m[1])))
        .collect();
    if mags.is_empty() {
        return 1.0;
    }
    mags.sort_by(f64::total_cmp);
    let rank = ((q * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
    let v = mags[rank - 1];
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Flow-wheel color: hue from the motion direction (0° = +u, red), saturation
/// from `‖v‖ / v_max` clamped to 1, full value.
pub fn motion_color(v: [f64; 2], v_max: f64) -> [u8; 3] {
    let mag = v[0].hypot(v[1]);
    if !(v_max > 0.0) || mag == 0.0 {
        return [255, 255, 255];
    }
    let hue = v[1].atan2(v[0]).to_degrees().rem_euclid(360.0);
    let sat = (mag / v_max).min(1.0);
    hsv_to_rgb(hue, sat, 1.0)
}

fn hsv_to_rgb(hue: f64, sat: f64, val: f64) -> [u8; 3] {
    let h = (hue / 60.0).rem_euclid(6.0);
    let c = val * sat;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = val - c;
    let q = |ch: f64| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Rasterizes each frame: black background, trails (oldest first) blended
/// with their alpha, then in-bounds anchors as opaque discs.
pub fn render_control_frames(
    frames: &[AnchorFrameProjection],
    cfg: &TsaConfig,
    width: u32,
    height: u32,
) -> Result<Vec<Raster>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "image size must be non-zero, got {width}x{height}"
        )));
    }
    cfg.validate()?;
    frames.iter().map(|f| render_frame(f, cfg, width, height)).collect()
}

pub fn render_frame(
    frame: &AnchorFrameProjection,
    cfg: &TsaConfig,
    width: u32,
    height: u32,
) -> Result<Raster> {
    let mut img = Raster::new(width, height)?;
    let visible: Vec<&AnchorState> = frame.anchors.iter().filter(|a| a.in_bounds).collect();
    for age in (1..=cfg.trail_depth).rev() {
        for a in &visible {
            for tp in a.trail.iter().filter(|tp| tp.age == age) {
                img.fill_disc(tp.u, tp.v, cfg.point_radius, a.color, tp.alpha);
            }
        }
    }
    for a in &visible {
        if let Some(px) = a.pixel() {
            img.fill_disc(px.u, px.v, cfg.point_radius, a.color, 1.0);
        }
    }
    Ok(img)
}

//! Anchor visibility and key-frame selection for windowed autoregressive
//! generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, RigidTransform};
use crate::tsa::{generate_anchors, project_sequence, AnchorFrameProjection, AnchorRegion, TsaConfig};

pub const DEFAULT_WINDOW: usize = 81;
pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// `ratios[t] = |A_t| / |A_0|` for frames `t = 0..` of one window; `ratios[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilitySeries {
    pub ratios: Vec<f64>,
    pub anchor_count_0: usize,
}

/// Visibility of the conditioning frame's in-bounds anchors across the window.
/// An anchor counts at frame t whenever it is in bounds there, whether or not
/// it stayed visible in between.
pub fn visibility_series(projections: &[AnchorFrameProjection]) -> Result<VisibilitySeries> {
    let first = projections.first().ok_or(Error::NoVisibleAnchors)?;
    let members: Vec<usize> = first
        .anchors
        .iter()
        .enumerate()
        .filter(|(_, a)| a.in_bounds)
        .map(|(i, _)| i)
        .collect();
    if members.is_empty() {
        return Err(Error::NoVisibleAnchors);
    }
    let n0 = members.len();
    let ratios = projections
        .iter()
        .map(|f| {
            let kept = members
                .iter()
                .filter(|&&i| f.anchors.get(i).is_some_and(|a| a.in_bounds))
                .count();
            kept as f64 / n0 as f64
        })
        .collect();
    Ok(VisibilitySeries {
        ratios,
        anchor_count_0: n0,
    })
}

/// Returns the first `t ∈ 1..=window` with `V_t < threshold`, or `window` when
/// no frame violates. Equality counts as visible.
pub fn select_key_frame(series: &VisibilitySeries, window: usize, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if window == 0 {
        return Err(Error::InvalidParameter("window must be >= 1".into()));
    }
    let v = &series.ratios;
    if v.len() < window {
        return Err(Error::WindowUnderrun {
            len: v.len(),
            window,
        });
    }
    for t in 1..=window {
        match v.get(t) {
            Some(&vt) if vt < threshold => return Ok(t),
            Some(_) => {}
            // V_window itself is missing and nothing earlier violated
            None => {
                return Err(Error::WindowUnderrun {
                    len: v.len(),
                    window: window + 1,
                })
            }
        }
    }
    Ok(window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub key: usize,
    pub end: usize,
    pub min_visibility: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub windows: Vec<Window>,
    pub window_length: usize,
    pub threshold: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanParams {
    pub window: usize,
    pub threshold: f64,
    pub tsa: TsaConfig,
    pub region: AnchorRegion,
    pub seed: u64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            tsa: TsaConfig::default(),
            region: AnchorRegion::default(),
            seed: 0,
        }
    }
}

/// Chains windows over `poses[0..=horizon]`, where `horizon = poses.len() - 1`.
///
/// Each window re-seeds anchors around the ego position at its start frame,
/// projects up to `window` frames ahead, and hands over at the selected key
/// frame. A final window shorter than `window` is evaluated over the frames
/// that remain.
pub fn plan_windows(poses: &[RigidTransform], k: &Intrinsics, params: &PlanParams) -> Result<WindowPlan> {
    if poses.is_empty() {
        return Err(Error::InvalidParameter("pose sequence is empty".into()));
    }
    let horizon = poses.len() - 1;
    if params.window == 0 || horizon < params.window {
        return Err(Error::WindowUnderrun {
            len: horizon,
            window: params.window,
        });
    }
    let mut windows = Vec::new();
    let mut start = 0usize;
    while start < horizon {
        let end = (start + params.window).min(horizon);
        let span = end - start;
        let seed = params.seed.wrapping_add(windows.len() as u64);
        let anchors = generate_anchors(&poses[start], &params.tsa, &params.region, seed)?;
        let seq = project_sequence(&anchors, &poses[start..=end], k, &params.tsa)?;
        let series = visibility_series(&seq.frames)?;
        let key_rel = select_key_frame(&series, span, params.threshold)?;
        let tail = &series.ratios[1..=span];
        let min_visibility = tail.iter().copied().fold(f64::INFINITY, f64::min);
        windows.push(Window {
            start,
            key: start + key_rel,
            end,
            min_visibility,
            violated: min_visibility < params.threshold,
        });
        start += key_rel;
    }
    Ok(WindowPlan {
        windows,
        window_length: params.window,
        threshold: params.threshold,
        horizon,
    })
}

//! Motion-weighted latent consistency loss over tracked dynamic points.
//!
//! Track pixels index the latent grid at `p / stride` with bilinear
//! interpolation. Invalid track entries, and entries whose latent location
//! falls outside the grid, contribute nothing.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STRIDE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    /// Pixel position per frame, frames `0..=T`.
    pub xy: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

impl Track {
    fn point(&self, t: usize) -> Option<[f64; 2]> {
        if self.valid[t] {
            Some(self.xy[t])
        } else {
            None
        }
    }

    /// `Σ_t ‖p_t − p_0‖₂` over valid frames; zero when frame 0 is invalid.
    pub fn total_displacement(&self) -> f64 {
        let Some(p0) = self.point(0) else {
            return 0.0;
        };
        (1..self.xy.len())
            .filter_map(|t| self.point(t))
            .map(|p| (p[0] - p0[0]).hypot(p[1] - p0[1]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    pub tracks: Vec<Track>,
    pub source: String,
}

#[derive(Serialize, Deserialize)]
struct TrackFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride_note: Option<String>,
    #[serde(default)]
    source: String,
    tracks: Vec<Track>,
}

impl TrackSet {
    pub fn new(tracks: Vec<Track>, source: impl Into<String>) -> Result<Self> {
        let set = Self {
            tracks,
            source: source.into(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.tracks.first() else {
            return Ok(());
        };
        let len = first.xy.len();
        if len < 2 {
            return Err(Error::DimensionMismatch(format!(
                "tracks need at least 2 frames, got {len}"
            )));
        }
        for tr in &self.tracks {
            if tr.xy.len() != len || tr.valid.len() != len {
                return Err(Error::DimensionMismatch(format!(
                    "track {} has {} positions and {} flags, expected {len}",
                    tr.id,
                    tr.xy.len(),
                    tr.valid.len()
                )));
            }
            if tr.xy.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::DimensionMismatch(format!(
                    "track {} has non-finite coordinates",
                    tr.id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Number of frames `T + 1`.
    pub fn frame_count(&self) -> usize {
        self.tracks.first().map_or(0, |t| t.xy.len())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: TrackFile = serde_json::from_str(text)?;
        let source = if f.source.is_empty() {
            f.stride_note.unwrap_or_default()
        } else {
            f.source
        };
        Self::new(f.tracks, source)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = TrackFile {
            stride_note: None,
            source: self.source.clone(),
            tracks: self.tracks.clone(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Keeps tracks whose total displacement exceeds `motion_threshold` and draws
/// `count` of them uniformly without replacement (original order preserved).
pub fn sample_dynamic_points(
    tracks: &TrackSet,
    motion_threshold: f64,
    count: usize,
    seed: u64,
) -> Result<TrackSet> {
    if tracks.is_empty() {
        return Err(Error::InvalidParameter("track set is empty".into()));
    }
    let qualifying: Vec<usize> = tracks
        .tracks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.total_displacement() > motion_threshold)
        .map(|(i, _)| i)
        .collect();
    if qualifying.is_empty() {
        return Err(Error::NoDynamicRegions {
            threshold: motion_threshold,
        });
    }
    let chosen: Vec<usize> = if qualifying.len() <= count {
        qualifying
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, qualifying.len(), count)
            .into_iter()
            .map(|i| qualifying[i])
            .collect();
        picks.sort_unstable();
        picks
    };
    Ok(TrackSet {
        tracks: chosen.into_iter().map(|i| tracks.tracks[i].clone()).collect(),
        source: tracks.source.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionWeights {
    pub w: Vec<f64>,
}

/// `w_i = D_i / Σ_j D_j` with `D_i` the track's total displacement.
pub fn motion_weights(tracks: &TrackSet) -> Result<MotionWeights> {
    let d: Vec<f64> = tracks.tracks.iter().map(Track::total_displacement).collect();
    let total: f64 = d.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(MotionWeights {
        w: d.into_iter().map(|x| x / total).collect(),
    })
}

/// Feature grids for frames `0..=T`, laid out `[frame][channel][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    frames: usize,
    channels: usize,
    height: usize,
    width: usize,
    stride: f64,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentMeta {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub stride: f64,
}

impl LatentSequence {
    pub fn new(
        frames: usize,
        channels: usize,
        height: usize,
        width: usize,
        stride: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if frames < 2 || channels == 0 || height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "latents need >= 2 frames and non-empty grids, got {frames}x{channels}x{height}x{width}"
            )));
        }
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(Error::InvalidParameter(format!("stride must be > 0, got {stride}")));
        }
        let expected = frames * channels * height * width;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "latent data has {} values, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            frames,
            channels,
            height,
            width,
            stride,
            data,
        })
    }

    pub fn zeros(frames: usize, channels: usize, height: usize, width: usize, stride: f64) -> Result<Self> {
        Self::new(
            frames,
            channels,
            height,
            width,
            stride,
            vec![0.0; frames * channels * height * width],
        )
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn stride(&self) -> f64 {
        self.stride
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn index(&self, frame: usize, channel: usize, row: usize, col: usize) -> usize {
        ((frame * self.channels + channel) * self.height + row) * self.width + col
    }

    pub fn get(&self, frame: usize, channel: usize, row: usize, col: usize) -> f64 {
        self.data[self.index(frame, channel, row, col)]
    }

    pub fn set(&mut self, frame: usize, channel: usize, row: usize, col: usize, value: f64) {
        let i = self.index(frame, channel, row, col);
        self.data[i] = value;
    }

    pub fn meta(&self) -> LatentMeta {
        LatentMeta {
            t: self.frames - 1,
            c: self.channels,
            h: self.height,
            w: self.width,
            stride: self.stride,
        }
    }

    /// Decodes a raw little-endian f32 tensor described by `meta`.
    pub fn from_f32_le(meta: &LatentMeta, bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(4) {
            return Err(Error::Parse(format!(
                "latent file length {} is not a multiple of 4",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Self::new(meta.t + 1, meta.c, meta.h, meta.w, meta.stride, data)
    }

    /// Raw little-endian f32 encoding (values are narrowed to f32).
    pub fn to_f32_le(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect()
    }

    /// Reads `path` (raw f32) with its sidecar `meta_path` (JSON).
    pub fn read(path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<Self> {
        let meta: LatentMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        Self::from_f32_le(&meta, &std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_f32_le())?;
        std::fs::write(meta_path, serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }

    /// Bilinear taps `(row·W + col, weight)` for pixel `p`, or `None` when
    /// `p / stride` is outside `[0, W−1] × [0, H−1]`. Zero-weight taps are dropped.
    pub fn taps(&self, p: [f64; 2]) -> Option<Vec<(usize, f64)>> {
        let x = p[0] / self.stride;
        let y = p[1] / self.stride;
        let (cols, fx) = axis_taps(x, self.width)?;
        let (rows, fy) = axis_taps(y, self.height)?;
        let mut out = Vec::with_capacity(4);
        for (ri, wy) in [(rows.0, 1.0 - fy), (rows.1, fy)] {
            for (ci, wx) in [(cols.0, 1.0 - fx), (cols.1, fx)] {
                let w = wy * wx;
                if w != 0.0 {
                    out.push((ri * self.width + ci, w));
                }
            }
        }
        Some(out)
    }

    fn sample_into(&self, frame: usize, taps: &[(usize, f64)], out: &mut [f64]) {
        let plane = self.height * self.width;
        for (c, o) in out.iter_mut().enumerate() {
            let base = (frame * self.channels + c) * plane;
            *o = taps.iter().map(|&(i, w)| w * self.data[base + i]).sum();
        }
    }

    /// Feature vector at pixel `p` of `frame`, or `None` off-grid.
    pub fn sample(&self, frame: usize, p: [f64; 2]) -> Option<Vec<f64>> {
        let taps = self.taps(p)?;
        let mut out = vec![0.0; self.channels];
        self.sample_into(frame, &taps, &mut out);
        Some(out)
    }
}

/// Lower/upper grid index and fractional weight along one axis.
fn axis_taps(x: f64, n: usize) -> Option<((usize, usize), f64)> {
    let max = (n - 1) as f64;
    if !(x >= 0.0 && x <= max) {
        return None;
    }
    if n == 1 {
        return Some(((0, 0), 0.0));
    }
    let i0 = (x.floor() as usize).min(n - 2);
    Some(((i0, i0 + 1), x - i0 as f64))
}

/// One contributing (track, frame) residual term.
struct Term {
    track: usize,
    frame: usize,
    taps0: Vec<(usize, f64)>,
    taps_t: Vec<(usize, f64)>,
    residual: Vec<f64>,
}

fn check_alignment(latents: &LatentSequence, tracks: &TrackSet, weights: &MotionWeights) -> Result<()> {
    if tracks.len() != weights.w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} tracks but {} weights",
            tracks.len(),
            weights.w.len()
        )));
    }
    if tracks.is_empty() {
        return Err(Error::DimensionMismatch("no tracks".into()));
    }
    tracks.validate()?;
    if tracks.frame_count() != latents.frames() {
        return Err(Error::DimensionMismatch(format!(
            "tracks span {} frames, latents {}",
            tracks.frame_count(),
            latents.frames()
        )));
    }
    Ok(())
}

fn terms(latents: &LatentSequence, tracks: &TrackSet) -> Vec<Term> {
    let c = latents.channels();
    let mut out = Vec::new();
    let mut z0 = vec![0.0; c];
    let mut zt = vec![0.0; c];
    for (i, tr) in tracks.tracks.iter().enumerate() {
        let Some(taps0) = tr.point(0).and_then(|p| latents.taps(p)) else {
            continue;
        };
        latents.sample_into(0, &taps0, &mut z0);
        for t in 1..latents.frames() {
            let Some(taps_t) = tr.point(t).and_then(|p| latents.taps(p)) else {
                continue;
            };
            latents.sample_into(t, &taps_t, &mut zt);
            out.push(Term {
                track: i,
                frame: t,
                taps0: taps0.clone(),
                taps_t,
                residual: zt.iter().zip(&z0).map(|(a, b)| a - b).collect(),
            });
        }
    }
    out
}

/// `L = (1/N) Σ_i w_i Σ_{t≥1} ‖z_t(p_i^t) − z_0(p_i^0)‖²`.
pub fn consistency_loss(latents: &LatentSequence, tracks: &TrackSet, weights: &MotionWeights) -> Result<f64> {
    check_alignment(latents, tracks, weights)?;
    let n = tracks.len() as f64;
    // summation order: track index, then frame
    let mut per_track = vec![0.0; tracks.len()];
    for term in terms(latents, tracks) {
        per_track[term.track] += term.residual.iter().map(|r| r * r).sum::<f64>();
    }
    Ok(per_track
        .iter()
        .zip(&weights.w)
        .map(|(s, w)| w * s)
        .sum::<f64>()
        / n)
}

/// Analytic gradient of [`consistency_loss`] with respect to every latent value.
pub fn consistency_loss_grad(
    latents: &LatentSequence,
    tracks: &TrackSet,
    weights: &MotionWeights,
) -> Result<LatentSequence> {
    check_alignment(latents, tracks, weights)?;
    let n = tracks.len() as f64;
    let mut grad = LatentSequence::zeros(
        latents.frames(),
        latents.channels(),
        latents.height(),
        latents.width(),
        latents.stride(),
    )?;
    let plane = latents.height() * latents.width();
    let channels = latents.channels();
    for term in terms(latents, tracks) {
        let scale = 2.0 / n * weights.w[term.track];
        for (c, r) in term.residual.iter().enumerate() {
            let g = scale * r;
            let base_t = (term.frame * channels + c) * plane;
            for &(i, w) in &term.taps_t {
                grad.data[base_t + i] += g * w;
            }
            let base_0 = c * plane;
            for &(i, w) in &term.taps0 {
                grad.data[base_0 + i] -= g * w;
            }
        }
    }
    Ok(grad)
}

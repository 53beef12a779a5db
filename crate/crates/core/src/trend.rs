//! Clock-direction trend tokens and the trajectory prompt.

use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PREAMBLE_HEAD: &str = "<T1> to <T12> represent the 12 clock directions, each indicating a different heading angle. I will use them to describe the trajectory: the trajectory of each frame is ";

/// Ordered ego positions in the first frame's ego-aligned world frame
/// (x forward, y left, z up), sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<Point3<f64>>,
    frame_rate: f64,
}

impl Trajectory {
    pub fn new(points: Vec<Point3<f64>>, frame_rate: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TrajectoryTooShort {
                min: 2,
                got: points.len(),
            });
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "frame_rate must be positive, got {frame_rate}"
            )));
        }
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidParameter("trajectory has non-finite coordinates".into()));
        }
        Ok(Self { points, frame_rate })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> f64 {
        index as f64 / self.frame_rate
    }

    /// Segment displacements `x[t+1] - x[t]`.
    pub fn segments(&self) -> impl Iterator<Item = nalgebra::Vector3<f64>> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }
}

/// One of the twelve clock-hour heading tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TrendToken(u8);

impl TrendToken {
    pub fn new(hour: u8) -> Result<Self> {
        if (1..=12).contains(&hour) {
            Ok(Self(hour))
        } else {
            Err(Error::InvalidParameter(format!("clock hour must be 1..=12, got {hour}")))
        }
    }

    pub fn hour(self) -> u8 {
        self.0
    }

    /// Maps a clockwise clock angle in degrees (0° = forward) to its hour.
    /// Hour k owns `[30k − 15°, 30k + 15°)`; hour 12 owns `[−15°, 15°)`.
    pub fn from_clock_angle(degrees: f64) -> Self {
        let a = normalize_degrees(degrees);
        let sector = ((a + 15.0) / 30.0).floor() as i64;
        let hour = sector.rem_euclid(12);
        Self(if hour == 0 { 12 } else { hour as u8 })
    }

    /// The next hour clockwise (12 wraps to 1).
    pub fn next_clockwise(self) -> Self {
        Self(self.0 % 12 + 1)
    }
}

impl TryFrom<u8> for TrendToken {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TrendToken> for u8 {
    fn from(t: TrendToken) -> u8 {
        t.0
    }
}

impl fmt::Display for TrendToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<T{}>", self.0)
    }
}

fn normalize_degrees(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    // rem_euclid of a tiny negative value rounds up to exactly 360
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Clock angle of a ground-plane displacement: clockwise from forward, so
/// rightward (−y) is 90°.
pub fn clock_angle(dx: f64, dy: f64) -> f64 {
    normalize_degrees((-dy).atan2(dx).to_degrees())
}

/// Tokenizes every segment of `traj`. Segments whose horizontal length is
/// below `stationary_eps` repeat the previous token; a leading stationary run
/// maps to `<T12>`.
pub fn tokenize(traj: &Trajectory, stationary_eps: f64) -> Result<Vec<TrendToken>> {
    if traj.len() < 2 {
        return Err(Error::TrajectoryTooShort {
            min: 2,
            got: traj.len(),
        });
    }
    if !(stationary_eps >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "stationary_eps must be non-negative, got {stationary_eps}"
        )));
    }
    let mut prev = TrendToken(12);
    Ok(traj
        .segments()
        .map(|d| {
            if d.x.hypot(d.y) >= stationary_eps && (d.x != 0.0 || d.y != 0.0) {
                prev = TrendToken::from_clock_angle(clock_angle(d.x, d.y));
            }
            prev
        })
        .collect())
}

/// Builds the prompt: the fixed clock-direction preamble with the token
/// sequence filled in, followed by `base_prompt` when it is non-empty.
pub fn build_prompt(tokens: &[TrendToken], base_prompt: &str) -> Result<String> {
    if tokens.is_empty() {
        return Err(Error::NoSegments);
    }
    let mut out = String::with_capacity(PREAMBLE_HEAD.len() + tokens.len() * 6 + base_prompt.len() + 2);
    out.push_str(PREAMBLE_HEAD);
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.to_string());
    }
    out.push('.');
    if !base_prompt.is_empty() {
        out.push(' ');
        out.push_str(base_prompt);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[[f64; 3]]) -> Trajectory {
        Trajectory::new(points.iter().map(|p| Point3::from(*p)).collect(), 10.0).unwrap()
    }

    fn single(d: [f64; 3]) -> TrendToken {
        tokenize(&traj(&[[0.0; 3], d]), 1e-6).unwrap()[0]
    }

    #[test]
    fn cardinal_directions() {
        assert_eq!(single([1.0, 0.0, 0.0]).to_string(), "<T12>");
        assert_eq!(single([0.0, -1.0, 0.0]).to_string(), "<T3>");
        assert_eq!(single([-1.0, 0.0, 0.0]).to_string(), "<T6>");
        assert_eq!(single([0.0, 1.0, 0.0]).to_string(), "<T9>");
    }

    #[test]
    fn sector_boundaries_are_lower_inclusive() {
        assert_eq!(TrendToken::from_clock_angle(44.0).hour(), 1);
        assert_eq!(TrendToken::from_clock_angle(15.0).hour(), 1);
        assert_eq!(TrendToken::from_clock_angle(14.999).hour(), 12);
        assert_eq!(TrendToken::from_clock_angle(45.0).hour(), 2);
        assert_eq!(TrendToken::from_clock_angle(345.0).hour(), 12);
        assert_eq!(TrendToken::from_clock_angle(344.999).hour(), 11);
        assert_eq!(TrendToken::from_clock_angle(-15.0).hour(), 12);
        assert_eq!(TrendToken::from_clock_angle(-1e-300).hour(), 12);
    }

    #[test]
    fn vertical_motion_is_ignored() {
        assert_eq!(single([1.0, -1.0, 50.0]), single([1.0, -1.0, 0.0]));
    }

    #[test]
    fn stationary_segments_repeat_previous() {
        let t = traj(&[
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, -1.0005, 0.0],
            [1.0, -1.0, 0.0],
        ]);
        let hours: Vec<u8> = tokenize(&t, 0.01).unwrap().iter().map(|t| t.hour()).collect();
        assert_eq!(hours, vec![12, 3, 3, 12]);
    }

    #[test]
    fn short_trajectory_rejected() {
        let err = Trajectory::new(vec![Point3::origin()], 10.0).unwrap_err();
        assert!(matches!(err, Error::TrajectoryTooShort { got: 1, .. }));
    }

    #[test]
    fn prompt_template() {
        let toks = [TrendToken::new(12).unwrap(); 2];
        let p = build_prompt(&toks, "A sunny street.").unwrap();
        assert!(p.contains("the trajectory of each frame is <T12> <T12>."));
        assert!(p.ends_with(" A sunny street."));

        let p = build_prompt(&toks[..1], "").unwrap();
        assert_eq!(
            p,
            "<T1> to <T12> represent the 12 clock directions, each indicating a different heading angle. I will use them to describe the trajectory: the trajectory of each frame is <T12>."
        );
        assert!(matches!(build_prompt(&[], "x"), Err(Error::NoSegments)));
    }

    #[test]
    fn fifteen_seconds_at_ten_hertz() {
        let pts: Vec<[f64; 3]> = (0..151).map(|i| [i as f64, 0.0, 0.0]).collect();
        let toks = tokenize(&traj(&pts), 1e-3).unwrap();
        assert_eq!(toks.len(), 150);
        let prompt = build_prompt(&toks, "").unwrap();
        // "<T1> to <T12>" in the preamble accounts for two occurrences
        assert_eq!(prompt.matches("<T").count() - 2, 150);
    }

    #[test]
    fn token_serde_rejects_out_of_range() {
        assert!(serde_json::from_str::<TrendToken>("13").is_err());
        assert_eq!(serde_json::from_str::<TrendToken>("7").unwrap().hour(), 7);
    }
}

//! Synthetic driving scenes with exactly known geometry.
//!
//! Ego paths are analytic, so positions and headings are available in closed
//! form at every frame. Ground-truth tracks are projected here with their own
//! camera arithmetic (basis vectors, not the transform/projection code in
//! [`crate::geometry`]) so they can serve as an independent oracle.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, Intrinsics, RigidTransform};
use crate::lma::{Track, TrackSet};
use crate::trend::Trajectory;
use crate::tsa::{generate_anchors, AnchorRegion, AnchorSet, TsaConfig};

/// Camera mount height above the ego origin (m).
pub const CAMERA_HEIGHT: f64 = 1.5;
pub const LANE_WIDTH: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Straight,
    ArcTurn,
    UTurn,
    LaneChange,
    StopAndGo,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(Self::Straight),
            "arc_turn" => Ok(Self::ArcTurn),
            "u_turn" => Ok(Self::UTurn),
            "lane_change" => Ok(Self::LaneChange),
            "stop_and_go" => Ok(Self::StopAndGo),
            other => Err(Error::InvalidParameter(format!("unknown scenario kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// m/s
    pub speed: f64,
    /// s
    pub duration: f64,
    /// Hz
    pub frame_rate: f64,
    /// Total yaw change for arc turns (degrees, positive = left). The sign
    /// also picks the side of a lane change.
    pub turn_angle: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, speed: f64, duration: f64, frame_rate: f64) -> Self {
        Self {
            kind,
            speed,
            duration,
            frame_rate,
            turn_angle: match kind {
                ScenarioKind::ArcTurn => 90.0,
                ScenarioKind::UTurn => 180.0,
                _ => 0.0,
            },
            seed: 0,
        }
    }

    /// Number of frame intervals; the trajectory has one more point.
    pub fn intervals(&self) -> Result<usize> {
        if !(self.duration > 0.0 && self.frame_rate > 0.0) || !(self.duration * self.frame_rate).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "duration and frame_rate must be positive, got {} s @ {} Hz",
                self.duration, self.frame_rate
            )));
        }
        let n = self.duration * self.frame_rate;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n.max(1.0) || rounded < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "duration x frame_rate must be a positive integer, got {n}"
            )));
        }
        Ok(rounded as usize)
    }

    fn validate(&self) -> Result<usize> {
        let n = self.intervals()?;
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::InvalidParameter(format!("speed must be >= 0, got {}", self.speed)));
        }
        if !self.turn_angle.is_finite() {
            return Err(Error::InvalidParameter("turn_angle must be finite".into()));
        }
        let turns = match self.kind {
            ScenarioKind::ArcTurn => self.turn_angle != 0.0,
            ScenarioKind::UTurn | ScenarioKind::LaneChange => true,
            _ => false,
        };
        if turns && self.speed == 0.0 {
            return Err(Error::InvalidParameter(
                "zero speed cannot realize a heading change".into(),
            ));
        }
        Ok(n)
    }

    /// Signed total yaw change of the path (rad).
    pub fn total_yaw(&self) -> f64 {
        match self.kind {
            ScenarioKind::ArcTurn => self.turn_angle.to_radians(),
            ScenarioKind::UTurn => PI,
            _ => 0.0,
        }
    }

    /// Ego ground position and heading at time `tau` seconds.
    pub fn state_at(&self, tau: f64) -> ([f64; 2], f64) {
        let v = self.speed;
        let d = self.duration;
        match self.kind {
            ScenarioKind::Straight => ([v * tau, 0.0], 0.0),
            ScenarioKind::ArcTurn | ScenarioKind::UTurn => {
                let theta = self.total_yaw();
                if theta == 0.0 {
                    return ([v * tau, 0.0], 0.0);
                }
                let omega = theta / d;
                let r = v / omega;
                let yaw = omega * tau;
                ([r * yaw.sin(), r * (1.0 - yaw.cos())], yaw)
            }
            ScenarioKind::LaneChange => {
                let w = if self.turn_angle < 0.0 { -LANE_WIDTH } else { LANE_WIDTH };
                let phase = PI * tau / d;
                let y = w * (1.0 - phase.cos()) / 2.0;
                let dy = w * PI / (2.0 * d) * phase.sin();
                ([v * tau, y], dy.atan2(v))
            }
            ScenarioKind::StopAndGo => {
                let x = v / 2.0 * (tau + d / TAU * (TAU * tau / d).sin());
                ([x, 0.0], 0.0)
            }
        }
    }
}

/// Box-shaped mover with a scripted path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum DynamicObject {
    Linear {
        start: [f64; 3],
        velocity: [f64; 3],
        size: [f64; 3],
    },
    Arc {
        center: [f64; 3],
        radius: f64,
        start_angle: f64,
        /// rad/s, positive counter-clockwise
        rate: f64,
        size: [f64; 3],
    },
}

impl DynamicObject {
    /// Box center and heading at time `tau`.
    pub fn pose_at(&self, tau: f64) -> (Point3<f64>, f64) {
        match *self {
            DynamicObject::Linear { start, velocity, .. } => {
                let c = Point3::from(start) + Vector3::from(velocity) * tau;
                let heading = if velocity[0] == 0.0 && velocity[1] == 0.0 {
                    0.0
                } else {
                    velocity[1].atan2(velocity[0])
                };
                (c, heading)
            }
            DynamicObject::Arc {
                center,
                radius,
                start_angle,
                rate,
                ..
            } => {
                let a = start_angle + rate * tau;
                let c = Point3::new(center[0] + radius * a.cos(), center[1] + radius * a.sin(), center[2]);
                (c, a + rate.signum() * PI / 2.0)
            }
        }
    }

    pub fn size(&self) -> [f64; 3] {
        match *self {
            DynamicObject::Linear { size, .. } | DynamicObject::Arc { size, .. } => size,
        }
    }

    /// The eight box corners at time `tau`.
    pub fn corners_at(&self, tau: f64) -> [Point3<f64>; 8] {
        let (c, heading) = self.pose_at(tau);
        let [l, w, h] = self.size();
        let (s, co) = heading.sin_cos();
        let mut out = [Point3::origin(); 8];
        for (i, corner) in out.iter_mut().enumerate() {
            let dx = if i & 1 == 0 { -l / 2.0 } else { l / 2.0 };
            let dy = if i & 2 == 0 { -w / 2.0 } else { w / 2.0 };
            let dz = if i & 4 == 0 { -h / 2.0 } else { h / 2.0 };
            *corner = Point3::new(c.x + co * dx - s * dy, c.y + s * dx + co * dy, c.z + dz);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub spec: ScenarioSpec,
    pub trajectory: Trajectory,
    /// camera_from_world per frame.
    pub poses: Vec<RigidTransform>,
    /// Camera heading (yaw, rad) per frame.
    pub headings: Vec<f64>,
    pub intrinsics: Intrinsics,
    pub anchors: AnchorSet,
    pub dynamic_objects: Vec<DynamicObject>,
}

/// Default synthetic front camera: 1600×900, 64° horizontal field of view.
pub fn default_intrinsics() -> Intrinsics {
    Intrinsics {
        fx: 1266.0,
        fy: 1266.0,
        cx: 800.0,
        cy: 450.0,
        width: 1600,
        height: 900,
    }
}

/// camera_from_world for a forward-looking camera at `center` with heading `yaw`.
pub fn camera_pose(center: Point3<f64>, yaw: f64) -> RigidTransform {
    let (s, c) = yaw.sin_cos();
    // rows: camera right, down, forward expressed in the world frame
    let r = Matrix3::new(s, -c, 0.0, 0.0, 0.0, -1.0, c, s, 0.0);
    RigidTransform::new(r, -(r * center.coords), Direction::CameraFromWorld)
        .expect("yaw rotation is orthonormal")
}

/// Samples the scenario's ego path at every frame.
pub fn gen_trajectory(spec: &ScenarioSpec) -> Result<Trajectory> {
    let n = spec.validate()?;
    let points = (0..=n)
        .map(|i| {
            let ([x, y], _) = spec.state_at(i as f64 / spec.frame_rate);
            Point3::new(x, y, 0.0)
        })
        .collect();
    Trajectory::new(points, spec.frame_rate)
}

/// Options for scene assembly beyond the scenario itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneOptions {
    pub intrinsics: Intrinsics,
    pub tsa: TsaConfig,
    pub region: AnchorRegion,
    pub dynamic_objects: usize,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            intrinsics: default_intrinsics(),
            tsa: TsaConfig::default(),
            region: AnchorRegion::default(),
            dynamic_objects: 3,
        }
    }
}

/// Builds a complete scene: trajectory, poses, anchors around the first ego
/// position and seeded dynamic boxes ahead of the ego vehicle.
pub fn gen_scene(spec: &ScenarioSpec, opts: &SceneOptions) -> Result<SyntheticScene> {
    opts.intrinsics.validate()?;
    let n = spec.validate()?;
    let trajectory = gen_trajectory(spec)?;
    let headings: Vec<f64> = (0..=n)
        .map(|i| spec.state_at(i as f64 / spec.frame_rate).1)
        .collect();
    let poses: Vec<RigidTransform> = trajectory
        .points()
        .iter()
        .zip(&headings)
        .map(|(p, &yaw)| camera_pose(p + Vector3::new(0.0, 0.0, CAMERA_HEIGHT), yaw))
        .collect();
    let anchors = generate_anchors(&poses[0], &opts.tsa, &opts.region, spec.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_b0c5);
    let dynamic_objects = (0..opts.dynamic_objects)
        .map(|i| {
            let size = [4.5, 1.9, 1.6];
            if i % 2 == 0 {
                DynamicObject::Linear {
                    start: [rng.random_range(15.0..40.0), rng.random_range(-8.0..8.0), size[2] / 2.0],
                    velocity: [rng.random_range(-6.0..6.0), rng.random_range(-4.0..4.0), 0.0],
                    size,
                }
            } else {
                DynamicObject::Arc {
                    center: [rng.random_range(20.0..45.0), rng.random_range(-10.0..10.0), size[2] / 2.0],
                    radius: rng.random_range(5.0..15.0),
                    start_angle: rng.random_range(0.0..TAU),
                    rate: rng.random_range(-0.4..0.4),
                    size,
                }
            }
        })
        .collect();

    Ok(SyntheticScene {
        spec: *spec,
        trajectory,
        poses,
        headings,
        intrinsics: opts.intrinsics,
        anchors,
        dynamic_objects,
    })
}

impl SyntheticScene {
    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }

    pub fn camera_center(&self, frame: usize) -> Point3<f64> {
        self.trajectory.points()[frame] + Vector3::new(0.0, 0.0, CAMERA_HEIGHT)
    }

    /// Projects a world point with the camera basis of `frame`. Returns the
    /// pixel (zeros when the point sits on the camera plane) and visibility.
    pub fn project_gt(&self, frame: usize, x: &Point3<f64>) -> ([f64; 2], bool) {
        let k = &self.intrinsics;
        let yaw = self.headings[frame];
        let d = x - self.camera_center(frame);
        let forward = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        let right = Vector3::new(yaw.sin(), -yaw.cos(), 0.0);
        let z = d.dot(&forward);
        let xc = d.dot(&right);
        let yc = -d.z;
        if z.abs() < 1e-9 {
            return ([0.0, 0.0], false);
        }
        let u = k.fx * xc / z + k.cx;
        let v = k.fy * yc / z + k.cy;
        let inside = z > 0.0 && u >= 0.0 && u < f64::from(k.width) && v >= 0.0 && v < f64::from(k.height);
        ([u, v], inside)
    }

    /// Camera positions as a plain trajectory (for alignment metrics).
    pub fn camera_positions(&self) -> Vec<Point3<f64>> {
        (0..self.frame_count()).map(|i| self.camera_center(i)).collect()
    }
}

/// Noise-free pixel tracks: one per anchor (ids `0..K`), then eight per
/// dynamic box (ids continue). Validity is in-bounds visibility.
pub fn gen_scene_tracks(scene: &SyntheticScene) -> TrackSet {
    let frames = scene.frame_count();
    let mut tracks = Vec::new();
    for (j, x) in scene.anchors.anchors.iter().enumerate() {
        let (xy, valid) = (0..frames).map(|t| scene.project_gt(t, x)).unzip();
        tracks.push(Track { id: j as u64, xy, valid });
    }
    let mut next = scene.anchors.len() as u64;
    for obj in &scene.dynamic_objects {
        let corners: Vec<[Point3<f64>; 8]> = (0..frames)
            .map(|t| obj.corners_at(t as f64 / scene.spec.frame_rate))
            .collect();
        for c in 0..8 {
            let (xy, valid) = (0..frames).map(|t| scene.project_gt(t, &corners[t][c])).unzip();
            tracks.push(Track { id: next, xy, valid });
            next += 1;
        }
    }
    TrackSet {
        tracks,
        source: format!("synthetic {:?} seed {}", scene.spec.kind, scene.spec.seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_kinematics() {
        let spec = ScenarioSpec::new(ScenarioKind::Straight, 10.0, 2.0, 10.0);
        let t = gen_trajectory(&spec).unwrap();
        assert_eq!(t.len(), 21);
        assert_eq!(t.points()[0], Point3::origin());
        assert_relative_eq!(t.points()[20].x, 20.0, epsilon = 1e-12);
        for s in t.segments() {
            assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn quarter_arc_ends_perpendicular() {
        let spec = ScenarioSpec::new(ScenarioKind::ArcTurn, 10.0, 9.0, 10.0);
        let (_, yaw_end) = spec.state_at(9.0);
        let (_, yaw_start) = spec.state_at(0.0);
        assert!((yaw_end - yaw_start - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        // radius = arc length / angle
        let radius = 10.0 * 9.0 / std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(radius, 57.2958, epsilon = 1e-4);
        let ([x, y], _) = spec.state_at(9.0);
        assert_relative_eq!(x, radius, epsilon = 1e-9);
        assert_relative_eq!(y, radius, epsilon = 1e-9);
    }

    #[test]
    fn headings_follow_path_tangent() {
        for kind in [ScenarioKind::ArcTurn, ScenarioKind::UTurn, ScenarioKind::LaneChange] {
            let spec = ScenarioSpec { turn_angle: 70.0, ..ScenarioSpec::new(kind, 8.0, 6.0, 10.0) };
            for i in 1..60 {
                let tau = i as f64 / 10.0;
                let h = 1e-6;
                let (a, _) = spec.state_at(tau - h);
                let (b, _) = spec.state_at(tau + h);
                let tangent = (b[1] - a[1]).atan2(b[0] - a[0]);
                let (_, yaw) = spec.state_at(tau);
                let diff = (tangent - yaw + PI).rem_euclid(TAU) - PI;
                assert!(diff.abs() < 1e-6, "{kind:?} at {tau}: {diff}");
            }
        }
    }

    #[test]
    fn total_yaw_matches_turn_angle() {
        for angle in [15.0, 45.0, 90.0, -120.0, 170.0] {
            let spec = ScenarioSpec { turn_angle: angle, ..ScenarioSpec::new(ScenarioKind::ArcTurn, 5.0, 12.0, 10.0) };
            let scene = gen_scene(&spec, &SceneOptions { dynamic_objects: 0, ..Default::default() }).unwrap();
            let total = scene.headings.last().unwrap() - scene.headings[0];
            assert!((total - f64::to_radians(angle)).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_speed_turn_is_rejected() {
        let spec = ScenarioSpec::new(ScenarioKind::ArcTurn, 0.0, 5.0, 10.0);
        assert!(gen_trajectory(&spec).is_err());
        let spec = ScenarioSpec::new(ScenarioKind::Straight, 0.0, 5.0, 10.0);
        assert!(gen_trajectory(&spec).is_ok());
        let bad = ScenarioSpec::new(ScenarioKind::Straight, 1.0, 0.25, 10.0);
        assert!(gen_trajectory(&bad).is_err());
    }

    #[test]
    fn stationary_scene_has_constant_anchor_tracks() {
        let spec = ScenarioSpec::new(ScenarioKind::Straight, 0.0, 1.0, 10.0);
        let opts = SceneOptions { dynamic_objects: 0, ..Default::default() };
        let scene = gen_scene(&spec, &opts).unwrap();
        let tracks = gen_scene_tracks(&scene);
        assert_eq!(tracks.len(), opts.tsa.anchor_count);
        for tr in &tracks.tracks {
            assert!(tr.xy.iter().all(|p| *p == tr.xy[0]));
            assert_eq!(tr.total_displacement(), 0.0);
        }
    }

    #[test]
    fn moving_box_outruns_static_scene() {
        let spec = ScenarioSpec { seed: 4, ..ScenarioSpec::new(ScenarioKind::Straight, 0.0, 3.0, 10.0) };
        let mut scene = gen_scene(&spec, &SceneOptions { dynamic_objects: 0, ..Default::default() }).unwrap();
        scene.dynamic_objects.push(DynamicObject::Linear {
            start: [20.0, 6.0, 0.8],
            velocity: [0.0, -4.0, 0.0],
            size: [4.5, 1.9, 1.6],
        });
        let tracks = gen_scene_tracks(&scene);
        let k = scene.anchors.len();
        let static_max = tracks.tracks[..k].iter().map(Track::total_displacement).fold(0.0, f64::max);
        for tr in &tracks.tracks[k..] {
            assert!(tr.total_displacement() > static_max);
        }
    }

    #[test]
    fn scenes_are_deterministic() {
        let spec = ScenarioSpec { seed: 17, ..ScenarioSpec::new(ScenarioKind::LaneChange, 10.0, 4.0, 10.0) };
        let a = gen_scene(&spec, &SceneOptions::default()).unwrap();
        let b = gen_scene(&spec, &SceneOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(gen_scene_tracks(&a), gen_scene_tracks(&b));
    }

    #[test]
    fn pose_centers_sit_above_trajectory() {
        let spec = ScenarioSpec::new(ScenarioKind::UTurn, 5.0, 10.0, 10.0);
        let scene = gen_scene(&spec, &SceneOptions::default()).unwrap();
        for (i, pose) in scene.poses.iter().enumerate() {
            let c = pose.camera_center();
            let p = scene.trajectory.points()[i];
            assert!((c - (p + Vector3::new(0.0, 0.0, CAMERA_HEIGHT))).norm() < 1e-9);
        }
    }
}

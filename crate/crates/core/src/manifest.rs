//! Scene manifests: the JSON ingestion boundary for real or synthetic scenes.
//!
//! Loading normalizes every pose to camera_from_world with the z-forward,
//! x-right, y-down camera convention. Validation problems are collected and
//! reported together, each prefixed with its field path.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Direction, Intrinsics, RigidTransform};
use crate::synth::SyntheticScene;
use crate::trend::Trajectory;

pub const SCHEMA_VERSION: u64 = 1;

/// Camera axis conventions accepted in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraConvention {
    /// x right, y down, z forward (internal standard).
    Opencv,
    /// x right, y up, z backward.
    Opengl,
    /// x forward, y left, z up.
    Flu,
}

impl CameraConvention {
    const NAMES: [&'static str; 3] = ["opencv", "opengl", "flu"];

    fn parse(s: &str) -> Option<Self> {
        match s {
            "opencv" => Some(Self::Opencv),
            "opengl" => Some(Self::Opengl),
            "flu" => Some(Self::Flu),
            _ => None,
        }
    }

    /// Maps coordinates in this convention's camera frame to the internal one.
    pub fn to_opencv(self) -> Matrix3<f64> {
        match self {
            Self::Opencv => Matrix3::identity(),
            Self::Opengl => Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)),
            Self::Flu => Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentRef {
    pub data: String,
    pub meta: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneManifest {
    pub intrinsics: Intrinsics,
    /// camera_from_world, internal camera convention.
    pub poses: Vec<RigidTransform>,
    pub trajectory: Trajectory,
    pub frame_rate: f64,
    pub tracks: Option<String>,
    pub latents: Option<LatentRef>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

struct Collector {
    problems: Vec<String>,
}

impl Collector {
    fn push(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.problems.push(format!("{path}: {msg}"));
    }

    fn number(&mut self, obj: &Map<String, Value>, parent: &str, key: &str) -> Option<f64> {
        let path = join(parent, key);
        match obj.get(key) {
            None => {
                self.push(&path, "missing");
                None
            }
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.push(&path, format!("expected a finite number, got {v}"));
                    None
                }
            },
        }
    }

    fn uint(&mut self, obj: &Map<String, Value>, parent: &str, key: &str) -> Option<u32> {
        let path = join(parent, key);
        match obj.get(key) {
            None => {
                self.push(&path, "missing");
                None
            }
            Some(v) => match v.as_u64().and_then(|x| u32::try_from(x).ok()) {
                Some(x) if x > 0 => Some(x),
                _ => {
                    self.push(&path, format!("expected a positive integer, got {v}"));
                    None
                }
            },
        }
    }

    fn string<'a>(&mut self, obj: &'a Map<String, Value>, parent: &str, key: &str) -> Option<&'a str> {
        let path = join(parent, key);
        match obj.get(key) {
            None => {
                self.push(&path, "missing");
                None
            }
            Some(Value::String(s)) => Some(s),
            Some(v) => {
                self.push(&path, format!("expected a string, got {v}"));
                None
            }
        }
    }

    fn vec3(&mut self, v: &Value, path: &str) -> Option<[f64; 3]> {
        let arr = v.as_array().filter(|a| a.len() == 3);
        let vals: Option<Vec<f64>> = arr.and_then(|a| a.iter().map(|x| x.as_f64().filter(|f| f.is_finite())).collect());
        match vals {
            Some(v) => Some([v[0], v[1], v[2]]),
            None => {
                self.push(path, format!("expected 3 finite numbers, got {v}"));
                None
            }
        }
    }

    fn mat3(&mut self, v: &Value, path: &str) -> Option<Matrix3<f64>> {
        let rows = match v.as_array().filter(|a| a.len() == 3) {
            Some(r) => r,
            None => {
                self.push(path, "expected a 3x3 row-major array");
                return None;
            }
        };
        let mut m = Matrix3::zeros();
        let mut ok = true;
        for (i, row) in rows.iter().enumerate() {
            match self.vec3(row, &format!("{path}[{i}]")) {
                Some(r) => {
                    for j in 0..3 {
                        m[(i, j)] = r[j];
                    }
                }
                None => ok = false,
            }
        }
        ok.then_some(m)
    }
}

fn join(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::CameraFromWorld => "camera_from_world",
        Direction::WorldFromCamera => "world_from_camera",
    }
}

fn parse_direction(s: &str) -> Option<Direction> {
    match s {
        "camera_from_world" => Some(Direction::CameraFromWorld),
        "world_from_camera" => Some(Direction::WorldFromCamera),
        _ => None,
    }
}

impl SceneManifest {
    /// Reads and normalizes a manifest file.
    pub fn ingest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json_str(&text, base)
    }

    pub fn from_json_str(text: &str, base_dir: PathBuf) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        let Value::Object(obj) = &root else {
            return Err(Error::Validation(vec!["(root): expected a JSON object".into()]));
        };
        let mut c = Collector { problems: Vec::new() };

        if let Some(v) = obj.get("schema_version") {
            if v.as_u64() != Some(SCHEMA_VERSION) {
                c.push("schema_version", format!("unsupported version {v}, expected {SCHEMA_VERSION}"));
            }
        }

        let frame_rate = c.number(obj, "", "frame_rate");
        if let Some(fr) = frame_rate {
            if fr <= 0.0 {
                c.push("frame_rate", format!("must be > 0, got {fr}"));
            }
        }

        let intrinsics = match obj.get("intrinsics") {
            Some(Value::Object(k)) => {
                let vals = (
                    c.number(k, "intrinsics", "fx"),
                    c.number(k, "intrinsics", "fy"),
                    c.number(k, "intrinsics", "cx"),
                    c.number(k, "intrinsics", "cy"),
                    c.uint(k, "intrinsics", "width"),
                    c.uint(k, "intrinsics", "height"),
                );
                match vals {
                    (Some(fx), Some(fy), Some(cx), Some(cy), Some(w), Some(h)) => {
                        match Intrinsics::new(fx, fy, cx, cy, w, h) {
                            Ok(k) => Some(k),
                            Err(e) => {
                                c.push("intrinsics", e);
                                None
                            }
                        }
                    }
                    _ => None,
                }
            }
            Some(_) => {
                c.push("intrinsics", "expected an object");
                None
            }
            None => {
                c.push("intrinsics", "missing");
                None
            }
        };

        let direction = c.string(obj, "", "pose_direction").and_then(|s| {
            let d = parse_direction(s);
            if d.is_none() {
                c.push(
                    "pose_direction",
                    format!("unknown convention {s:?}; expected camera_from_world or world_from_camera"),
                );
            }
            d
        });
        let convention = c.string(obj, "", "camera_convention").and_then(|s| {
            let conv = CameraConvention::parse(s);
            if conv.is_none() {
                c.push(
                    "camera_convention",
                    format!("unknown convention {s:?}; expected one of {:?}", CameraConvention::NAMES),
                );
            }
            conv
        });

        let trajectory_pts: Option<Vec<Point3<f64>>> = match obj.get("trajectory") {
            Some(Value::Array(a)) => {
                let pts: Vec<Option<[f64; 3]>> = a
                    .iter()
                    .enumerate()
                    .map(|(i, v)| c.vec3(v, &format!("trajectory[{i}]")))
                    .collect();
                if a.len() < 2 {
                    c.push("trajectory", format!("need at least 2 points, got {}", a.len()));
                }
                pts.into_iter().map(|p| p.map(Point3::from)).collect()
            }
            Some(_) => {
                c.push("trajectory", "expected an array of [x, y, z]");
                None
            }
            None => {
                c.push("trajectory", "missing");
                None
            }
        };

        let raw_poses: Option<Vec<(Matrix3<f64>, Vector3<f64>, Option<Direction>)>> = match obj.get("poses") {
            Some(Value::Array(a)) => {
                let parsed: Vec<Option<_>> = a
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let path = format!("poses[{i}]");
                        let Value::Object(po) = p else {
                            c.push(&path, "expected an object with R and t");
                            return None;
                        };
                        let r = match po.get("R") {
                            Some(v) => c.mat3(v, &format!("{path}.R")),
                            None => {
                                c.push(&format!("{path}.R"), "missing");
                                None
                            }
                        };
                        let t = match po.get("t") {
                            Some(v) => c.vec3(v, &format!("{path}.t")),
                            None => {
                                c.push(&format!("{path}.t"), "missing");
                                None
                            }
                        };
                        let dir = match po.get("direction") {
                            None => None,
                            Some(Value::String(s)) => match parse_direction(s) {
                                Some(d) => Some(d),
                                None => {
                                    c.push(&format!("{path}.direction"), format!("unknown convention {s:?}"));
                                    return None;
                                }
                            },
                            Some(v) => {
                                c.push(&format!("{path}.direction"), format!("expected a string, got {v}"));
                                return None;
                            }
                        };
                        Some((r?, Vector3::from(t?), dir))
                    })
                    .collect();
                parsed.into_iter().collect()
            }
            Some(_) => {
                c.push("poses", "expected an array");
                None
            }
            None => {
                c.push("poses", "missing");
                None
            }
        };

        if let (Some(Value::Array(p)), Some(Value::Array(t))) = (obj.get("poses"), obj.get("trajectory")) {
            if p.len() != t.len() {
                c.push(
                    "poses",
                    format!("pose count {} does not match trajectory length {}", p.len(), t.len()),
                );
            }
        }

        let tracks = match obj.get("tracks") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                c.push("tracks", format!("expected a path string, got {v}"));
                None
            }
        };
        let latents = match obj.get("latents") {
            None | Some(Value::Null) => None,
            Some(v) => match serde_json::from_value::<LatentRef>(v.clone()) {
                Ok(l) => Some(l),
                Err(e) => {
                    c.push("latents", format!("expected {{\"data\": path, \"meta\": path}}: {e}"));
                    None
                }
            },
        };

        let mut poses = Vec::new();
        if let (Some(raw), Some(default_dir), Some(conv)) = (&raw_poses, direction, convention) {
            let to_cv = conv.to_opencv();
            for (i, (r, t, dir)) in raw.iter().enumerate() {
                let dir = dir.unwrap_or(default_dir);
                match RigidTransform::new(*r, *t, dir) {
                    Ok(tf) => {
                        let declared = tf.to_camera_from_world();
                        let (r_cv, t_cv) = if conv == CameraConvention::Opencv {
                            (*declared.rotation(), *declared.translation())
                        } else {
                            (to_cv * declared.rotation(), to_cv * declared.translation())
                        };
                        match RigidTransform::new(r_cv, t_cv, Direction::CameraFromWorld) {
                            Ok(p) => poses.push(p),
                            Err(e) => c.push(&format!("poses[{i}]"), e),
                        }
                    }
                    Err(e) => c.push(&format!("poses[{i}].R"), e),
                }
            }
        }

        let trajectory = match (&trajectory_pts, frame_rate) {
            (Some(pts), Some(fr)) if pts.len() >= 2 && fr > 0.0 => match Trajectory::new(pts.clone(), fr) {
                Ok(t) => Some(t),
                Err(e) => {
                    c.push("trajectory", e);
                    None
                }
            },
            _ => None,
        };

        if !c.problems.is_empty() {
            return Err(Error::Validation(c.problems));
        }
        Ok(Self {
            intrinsics: intrinsics.expect("validated"),
            poses,
            trajectory: trajectory.expect("validated"),
            frame_rate: frame_rate.expect("validated"),
            tracks,
            latents,
            base_dir,
        })
    }

    /// Resolves a manifest-relative path.
    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Canonical (normalized) JSON form.
    pub fn to_json(&self) -> Result<String> {
        // canonical zero: -0.0 is written as 0.0
        let z = |v: f64| v + 0.0;
        let poses: Vec<Value> = self
            .poses
            .iter()
            .map(|p| {
                let r = p.rotation().map(z);
                let t = p.translation().map(z);
                json!({
                    "R": [
                        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                    ],
                    "t": [t.x, t.y, t.z],
                })
            })
            .collect();
        let trajectory: Vec<[f64; 3]> = self
            .trajectory
            .points()
            .iter()
            .map(|p| [z(p.x), z(p.y), z(p.z)])
            .collect();
        let mut root = Map::new();
        root.insert("schema_version".into(), json!(SCHEMA_VERSION));
        root.insert("frame_rate".into(), json!(self.frame_rate));
        root.insert("intrinsics".into(), serde_json::to_value(self.intrinsics)?);
        root.insert("pose_direction".into(), json!(direction_name(Direction::CameraFromWorld)));
        root.insert("camera_convention".into(), json!("opencv"));
        root.insert("poses".into(), Value::Array(poses));
        root.insert("trajectory".into(), json!(trajectory));
        if let Some(t) = &self.tracks {
            root.insert("tracks".into(), json!(t));
        }
        if let Some(l) = &self.latents {
            root.insert("latents".into(), serde_json::to_value(l)?);
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(root))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn from_scene(scene: &SyntheticScene) -> Self {
        Self {
            intrinsics: scene.intrinsics,
            poses: scene.poses.clone(),
            trajectory: scene.trajectory.clone(),
            frame_rate: scene.spec.frame_rate,
            tracks: None,
            latents: None,
            base_dir: PathBuf::new(),
        }
    }

    /// Camera centers in the world frame.
    pub fn camera_positions(&self) -> Vec<Point3<f64>> {
        self.poses.iter().map(RigidTransform::camera_center).collect()
    }
}

//! Rigid transforms and pinhole projection.
//!
//! World frame: x forward, y left, z up (aligned with the ego vehicle at the
//! first frame). Camera frame: z forward, x right, y down.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;
const DEPTH_EPS: f64 = 1e-9;

/// Which way a [`RigidTransform`] maps points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    WorldFromCamera,
    CameraFromWorld,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::WorldFromCamera => Direction::CameraFromWorld,
            Direction::CameraFromWorld => Direction::WorldFromCamera,
        }
    }
}

/// A proper rigid motion `p ↦ R·p + t` tagged with the direction it maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    direction: Direction,
}

impl RigidTransform {
    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// determinant +1.
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        direction: Direction,
    ) -> Result<Self> {
        check_rotation(&rotation)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("translation is not finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
            direction,
        })
    }

    pub fn identity(direction: Direction) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            direction,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The inverse motion; the direction tag flips.
    pub fn invert(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
            direction: self.direction.flipped(),
        }
    }

    /// Matrix composition `self ∘ other`: applies `other` first. The result
    /// carries the direction of `self` (its output frame).
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            direction: self.direction,
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Returns the camera_from_world form, inverting if stored the other way.
    pub fn to_camera_from_world(&self) -> Self {
        match self.direction {
            Direction::CameraFromWorld => *self,
            Direction::WorldFromCamera => self.invert(),
        }
    }

    pub fn to_world_from_camera(&self) -> Self {
        match self.direction {
            Direction::WorldFromCamera => *self,
            Direction::CameraFromWorld => self.invert(),
        }
    }

    /// Camera optical center in world coordinates.
    pub fn camera_center(&self) -> Point3<f64> {
        Point3::from(self.to_world_from_camera().translation)
    }

    /// Largest elementwise deviation from another transform's matrix entries.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let dr = (self.rotation - other.rotation).abs().max();
        let dt = (self.translation - other.translation).abs().max();
        dr.max(dt)
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entry".into()));
    }
    let ortho = (r * r.transpose() - Matrix3::identity()).abs().max();
    if ortho > ORTHONORMAL_TOL {
        return Err(Error::InvalidRotation(format!(
            "R·Rᵀ deviates from identity by {ortho:e}"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(Error::InvalidRotation(format!("determinant {det} ≠ +1")));
    }
    Ok(())
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            problems.push(format!("fx must be > 0, got {}", self.fx));
        }
        if !(self.fy > 0.0 && self.fy.is_finite()) {
            problems.push(format!("fy must be > 0, got {}", self.fy));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            problems.push(format!("cx must lie in [0, {}), got {}", self.width, self.cx));
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            problems.push(format!("cy must lie in [0, {}), got {}", self.height, self.cy));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidIntrinsics(problems.join("; ")))
        }
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px.u >= 0.0 && px.u < f64::from(self.width) && px.v >= 0.0 && px.v < f64::from(self.height)
    }
}

/// Continuous pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Pixel,
    pub depth: f64,
    pub in_bounds: bool,
}

/// Projects a world point through `pose` (either direction; normalized to
/// camera_from_world internally).
pub fn project(point: &Point3<f64>, pose: &RigidTransform, k: &Intrinsics) -> Result<Projection> {
    let cam = pose.to_camera_from_world().apply(point);
    project_camera_point(&cam, k)
}

/// Projects a point already expressed in the camera frame.
pub fn project_camera_point(cam: &Point3<f64>, k: &Intrinsics) -> Result<Projection> {
    let z = cam.z;
    if z.abs() < DEPTH_EPS {
        return Err(Error::DegenerateDepth(z));
    }
    let pixel = Pixel::new(k.fx * cam.x / z + k.cx, k.fy * cam.y / z + k.cy);
    let in_bounds = z > 0.0 && k.contains(pixel);
    Ok(Projection {
        pixel,
        depth: z,
        in_bounds,
    })
}

/// Rotation about the world vertical axis (z up), counter-clockwise seen from above.
pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

//! Sim(3) trajectory alignment and the Geometric Alignment Error.
//!
//! The closed-form alignment follows Umeyama: center both point sets, take the
//! SVD of the cross-covariance, correct reflections with the determinant
//! sign, then recover scale and translation.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which the cross-covariance is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrajectory {
    pub positions: Vec<Point3<f64>>,
    /// Carried through file IO; not used by the metric.
    pub rotations: Option<Vec<UnitQuaternion<f64>>>,
}

impl PoseTrajectory {
    pub fn from_positions(positions: Vec<Point3<f64>>) -> Self {
        Self {
            positions,
            rotations: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Parses `index x y z [qw qx qy qz]` lines; `#` starts a comment.
    pub fn parse_tum(text: &str) -> Result<Self> {
        let mut positions = Vec::new();
        let mut rotations = Vec::new();
        let mut all_rot = true;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            match vals.len() {
                4 | 8 => {}
                n => {
                    return Err(Error::Parse(format!(
                        "line {}: expected 4 or 8 fields, got {n}",
                        lineno + 1
                    )))
                }
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("line {}: non-finite value", lineno + 1)));
            }
            positions.push(Point3::new(vals[1], vals[2], vals[3]));
            if vals.len() == 8 {
                // TUM order: qx qy qz qw
                let q = nalgebra::Quaternion::new(vals[7], vals[4], vals[5], vals[6]);
                rotations.push(UnitQuaternion::from_quaternion(q));
            } else {
                all_rot = false;
            }
        }
        Ok(Self {
            positions,
            rotations: (all_rot && !rotations.is_empty()).then_some(rotations),
        })
    }

    pub fn to_tum(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.positions.iter().enumerate() {
            write!(out, "{i} {} {} {}", p.x, p.y, p.z).unwrap();
            if let Some(q) = self.rotations.as_ref().and_then(|r| r.get(i)) {
                write!(out, " {} {} {} {}", q.i, q.j, q.k, q.w).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn read_tum(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_tum(&std::fs::read_to_string(path)?)
    }

    pub fn write_tum(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_tum())?;
        Ok(())
    }
}

/// A similarity transform `p ↦ s·R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub transform: Similarity,
    /// Per-frame distance between ground truth and the aligned estimate (m).
    pub residuals: Vec<f64>,
    /// Root mean square of `residuals` (m).
    pub gae: f64,
    /// Set when the cross-covariance has rank < 2: the minimum is attained but
    /// the rotation is not unique.
    pub degenerate: bool,
}

/// Sum of squared distances `Σ ‖gt_t − (s·R·est_t + t)‖²`.
pub fn alignment_objective(est: &[Point3<f64>], gt: &[Point3<f64>], sim: &Similarity) -> f64 {
    est.iter()
        .zip(gt)
        .map(|(e, g)| (g - sim.apply(e)).norm_squared())
        .sum()
}

fn centroid(pts: &[Point3<f64>]) -> Vector3<f64> {
    pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / pts.len() as f64
}

/// Least-squares similarity aligning `est` onto `gt`.
pub fn umeyama_align(est: &PoseTrajectory, gt: &PoseTrajectory) -> Result<AlignmentResult> {
    let (e, g) = (&est.positions, &gt.positions);
    if e.len() != g.len() {
        return Err(Error::LengthMismatch {
            est: e.len(),
            gt: g.len(),
        });
    }
    if e.len() < 3 {
        return Err(Error::TrajectoryTooShort {
            min: 3,
            got: e.len(),
        });
    }
    if e.iter().chain(g.iter()).any(|p| p.iter().any(|c| !c.is_finite())) {
        return Err(Error::InvalidParameter("trajectory has non-finite coordinates".into()));
    }
    let n = e.len() as f64;
    let mu_e = centroid(e);
    let mu_g = centroid(g);

    let mut var_e = 0.0;
    let mut cov = Matrix3::zeros();
    for (pe, pg) in e.iter().zip(g) {
        let de = pe.coords - mu_e;
        let dg = pg.coords - mu_g;
        var_e += de.norm_squared();
        cov += dg * de.transpose();
    }
    var_e /= n;
    cov /= n;

    let spread = e
        .iter()
        .map(|p| (p.coords - mu_e).norm())
        .fold(0.0, f64::max);
    let mu_scale = mu_e.norm().max(1.0);
    if !(spread > 1e-12 * mu_scale) || var_e <= 0.0 {
        return Err(Error::ZeroVariance);
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sv = svd.singular_values;

    // flip the direction of the smallest singular value on reflection
    let smallest = (0..3)
        .min_by(|&a, &b| sv[a].total_cmp(&sv[b]))
        .unwrap_or(2);
    let mut sign = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        sign[smallest] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&sign) * v_t;
    let trace_ds = sv.component_mul(&sign).sum();
    let scale = trace_ds / var_e;

    let max_sv = sv.max();
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * max_sv.max(f64::MIN_POSITIVE)).count();
    let degenerate = rank < 2;

    let transform = if e == g {
        // bit-identical inputs: the exact optimum is the identity
        Similarity {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    } else {
        Similarity {
            scale,
            rotation,
            translation: mu_g - scale * (rotation * mu_e),
        }
    };
    let residuals: Vec<f64> = e
        .iter()
        .zip(g)
        .map(|(pe, pg)| (pg - transform.apply(pe)).norm())
        .collect();
    let gae = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok(AlignmentResult {
        transform,
        residuals,
        gae,
        degenerate,
    })
}

/// Serializable GAE report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaeReport {
    pub gae: f64,
    pub s: f64,
    #[serde(rename = "R")]
    pub rotation: [[f64; 3]; 3],
    pub t: [f64; 3],
    pub residuals: Vec<f64>,
    pub frames: usize,
    pub frame_rate: f64,
    pub degenerate: bool,
}

pub fn gae_report(est: &PoseTrajectory, gt: &PoseTrajectory, frame_rate: f64) -> Result<GaeReport> {
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frame_rate must be positive, got {frame_rate}"
        )));
    }
    let a = umeyama_align(est, gt)?;
    let r = &a.transform.rotation;
    Ok(GaeReport {
        gae: a.gae,
        s: a.transform.scale,
        rotation: [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
        t: a.transform.translation.into(),
        residuals: a.residuals,
        frames: gt.len(),
        frame_rate,
        degenerate: a.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| Point3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-3.0..3.0)))
            .collect()
    }

    #[test]
    fn identity_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = PoseTrajectory::from_positions(random_points(&mut rng, 12));
        let a = umeyama_align(&pts, &pts).unwrap();
        assert_relative_eq!(a.transform.scale, 1.0, epsilon = 1e-9);
        assert!((a.transform.rotation - Matrix3::identity()).abs().max() < 1e-9);
        assert!(a.transform.translation.norm() < 1e-9);
        assert!(a.gae < 1e-9);
        assert!(!a.degenerate);
    }

    #[test]
    fn recovers_exact_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = random_points(&mut rng, 20);
        let r = *Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2).matrix();
        let sim = Similarity {
            scale: 2.0,
            rotation: r,
            translation: Vector3::new(1.0, 2.0, 3.0),
        };
        let gt: Vec<_> = est.iter().map(|p| sim.apply(p)).collect();
        let a = umeyama_align(&PoseTrajectory::from_positions(est), &PoseTrajectory::from_positions(gt)).unwrap();
        assert_relative_eq!(a.transform.scale, 2.0, epsilon = 1e-9);
        assert!((a.transform.translation - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-9);
        assert!((a.transform.rotation - r).abs().max() < 1e-9);
        assert!(a.gae < 1e-9);
    }

    #[test]
    fn reflection_is_corrected() {
        // gt is a mirror image of est; the best proper rotation is still det +1
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = random_points(&mut rng, 15);
        let gt: Vec<_> = est.iter().map(|p| Point3::new(p.x, p.y, -p.z)).collect();
        let a = umeyama_align(&PoseTrajectory::from_positions(est), &PoseTrajectory::from_positions(gt)).unwrap();
        assert_relative_eq!(a.transform.rotation.determinant(), 1.0, epsilon = 1e-9);
        assert!(a.transform.scale > 0.0);
        assert!(a.gae > 0.1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = |x: f64| Point3::new(x, 0.0, 0.0);
        let three = PoseTrajectory::from_positions(vec![p(0.0), p(1.0), p(2.0)]);
        let four = PoseTrajectory::from_positions(vec![p(0.0), p(1.0), p(2.0), p(3.0)]);
        assert!(matches!(umeyama_align(&three, &four), Err(Error::LengthMismatch { .. })));
        let two = PoseTrajectory::from_positions(vec![p(0.0), p(1.0)]);
        assert!(matches!(umeyama_align(&two, &two), Err(Error::TrajectoryTooShort { .. })));
        let same = PoseTrajectory::from_positions(vec![p(5.0); 4]);
        assert!(matches!(umeyama_align(&same, &four), Err(Error::ZeroVariance)));
    }

    #[test]
    fn collinear_ground_truth_is_flagged_not_fatal() {
        let line: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let t = PoseTrajectory::from_positions(line);
        let a = umeyama_align(&t, &t).unwrap();
        assert!(a.degenerate);
        assert!(a.gae < 1e-9);
    }

    #[test]
    fn gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let est = random_points(&mut rng, 30);
        let gt: Vec<_> = est
            .iter()
            .map(|p| p + Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0))
            .collect();
        let gt = PoseTrajectory::from_positions(gt);
        let base = umeyama_align(&PoseTrajectory::from_positions(est.clone()), &gt).unwrap().gae;
        for _ in 0..20 {
            let axis = Unit::new_normalize(Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1));
            let pre = Similarity {
                scale: rng.random_range(0.1..10.0),
                rotation: *Rotation3::from_axis_angle(&axis, rng.random_range(-3.0..3.0)).matrix(),
                translation: Vector3::new(rng.random_range(-50.0..50.0), 3.0, -7.0),
            };
            let moved = PoseTrajectory::from_positions(est.iter().map(|p| pre.apply(p)).collect());
            let g = umeyama_align(&moved, &gt).unwrap().gae;
            assert!((g - base).abs() < 1e-9, "{g} vs {base}");
        }
    }

    #[test]
    fn optimum_is_local_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let est = random_points(&mut rng, 10);
        let gt: Vec<_> = est.iter().map(|p| p * 1.5 + Vector3::new(rng.random(), rng.random(), rng.random())).collect();
        let a = umeyama_align(&PoseTrajectory::from_positions(est.clone()), &PoseTrajectory::from_positions(gt.clone())).unwrap();
        let best = alignment_objective(&est, &gt, &a.transform);
        for _ in 0..100 {
            let axis = Unit::new_normalize(Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let d = Rotation3::from_axis_angle(&axis, rng.random_range(-1e-3..1e-3));
            let pert = Similarity {
                scale: a.transform.scale * (1.0 + rng.random_range(-1e-3..1e-3)),
                rotation: d.matrix() * a.transform.rotation,
                translation: a.transform.translation + Vector3::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3)),
            };
            assert!(alignment_objective(&est, &gt, &pert) >= best - 1e-9 * best.max(1.0));
        }
    }

    #[test]
    fn tum_round_trip_and_errors() {
        let text = "# header\n0 1 2 3\n1 4 5 6 1 0 0 0\n\n2 7 8 9\n";
        let t = PoseTrajectory::parse_tum(text).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.rotations.is_none());
        assert_eq!(t.positions[2], Point3::new(7.0, 8.0, 9.0));
        let back = PoseTrajectory::parse_tum(&t.to_tum()).unwrap();
        assert_eq!(back, t);
        assert!(PoseTrajectory::parse_tum("0 1 2\n").is_err());
        assert!(PoseTrajectory::parse_tum("0 1 2 x\n").is_err());

        // quaternion columns are qx qy qz qw: 90 deg about z
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = PoseTrajectory::parse_tum(&format!("0 0 0 0 0 0 {h} {h}\n")).unwrap();
        let r = q.rotations.as_ref().unwrap()[0];
        assert!((r * Vector3::x() - Vector3::y()).norm() < 1e-12);
        assert_eq!(PoseTrajectory::parse_tum(&q.to_tum()).unwrap(), q);
    }

    #[test]
    fn report_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts = PoseTrajectory::from_positions(random_points(&mut rng, 5));
        let r = gae_report(&pts, &pts, 10.0).unwrap();
        assert_eq!(r.gae, r.gae.abs());
        assert!(r.gae < 1e-9);
        let v = serde_json::to_value(&r).unwrap();
        for key in ["gae", "s", "R", "t", "residuals"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}

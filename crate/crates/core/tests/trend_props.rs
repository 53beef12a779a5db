use driverse_core::trend::{build_prompt, clock_angle, tokenize, Trajectory, TrendToken};
use nalgebra::{Point3, Rotation3, Vector3};
use proptest::prelude::*;

/// Segment headings (clock angle, degrees) at least `margin` away from every
/// sector boundary.
fn headings(margin: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u32..12, margin..(30.0 - margin)), 1..40)
        .prop_map(|v| v.into_iter().map(|(k, off)| (k as f64 * 30.0 + 15.0 + off) % 360.0).collect())
}

fn path(angles: &[f64], lengths: &[f64]) -> Trajectory {
    let mut p = Point3::origin();
    let mut pts = vec![p];
    for (a, l) in angles.iter().zip(lengths.iter().cycle()) {
        // clock angle θ is measured clockwise from +x, i.e. toward −y
        let r = a.to_radians();
        p += Vector3::new(l * r.cos(), -l * r.sin(), 0.0);
        pts.push(p);
    }
    Trajectory::new(pts, 10.0).unwrap()
}

fn rotate_about_z(traj: &Trajectory, degrees: f64) -> Trajectory {
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), degrees.to_radians());
    Trajectory::new(traj.points().iter().map(|p| rot * p).collect(), traj.frame_rate()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn clockwise_rotation_shifts_tokens_one_hour(angles in headings(1e-3), len in 0.1f64..20.0) {
        let traj = path(&angles, &[len]);
        let before = tokenize(&traj, 1e-6).unwrap();
        // a clockwise turn seen from above is a negative yaw
        let after = tokenize(&rotate_about_z(&traj, -30.0), 1e-6).unwrap();
        for (a, b) in before.iter().zip(&after) {
            prop_assert_eq!(a.next_clockwise(), *b);
        }
    }

    #[test]
    fn tokens_ignore_uniform_scaling(angles in headings(1e-3), lens in prop::collection::vec(0.5f64..5.0, 1..5), k in 0.01f64..100.0) {
        let traj = path(&angles, &lens);
        let scaled = Trajectory::new(traj.points().iter().map(|p| Point3::from(p.coords * k)).collect(), 10.0).unwrap();
        prop_assert_eq!(tokenize(&traj, 1e-9).unwrap(), tokenize(&scaled, 1e-9).unwrap());
    }

    #[test]
    fn vertical_motion_does_not_change_tokens(angles in headings(1e-3), dz in -5.0f64..5.0) {
        let traj = path(&angles, &[2.0]);
        let lifted = Trajectory::new(
            traj.points().iter().enumerate().map(|(i, p)| p + Vector3::new(0.0, 0.0, dz * i as f64)).collect(),
            10.0,
        ).unwrap();
        prop_assert_eq!(tokenize(&traj, 1e-6).unwrap(), tokenize(&lifted, 1e-6).unwrap());
    }

    #[test]
    fn clock_angle_lands_in_range(dx in -1e3f64..1e3, dy in -1e3f64..1e3) {
        let a = clock_angle(dx, dy);
        prop_assert!((0.0..360.0).contains(&a));
    }
}

#[test]
fn every_hour_token_appears_in_a_full_circle() {
    let angles: Vec<f64> = (0..12).map(|k| k as f64 * 30.0 + 2.0).collect();
    let tokens = tokenize(&path(&angles, &[1.0]), 1e-6).unwrap();
    let hours: Vec<u8> = tokens.iter().map(|t| t.hour()).collect();
    assert_eq!(hours, vec![12, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]);
}

#[test]
fn prompt_lists_one_token_per_segment() {
    let traj = path(&[0.0; 150], &[1.0]);
    let tokens = tokenize(&traj, 1e-6).unwrap();
    let prompt = build_prompt(&tokens, "A sunny street.").unwrap();
    let body = prompt.split("frame is ").nth(1).unwrap();
    assert_eq!(body.matches("<T12>").count(), 150);
    assert!(prompt.ends_with(". A sunny street."));
    assert_eq!(tokens[0], TrendToken::new(12).unwrap());
}

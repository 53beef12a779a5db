//! Closed-form alignment checked against a generic iterative minimizer.

use driverse_core::gae::{alignment_objective, umeyama_align, PoseTrajectory, Similarity};
use nalgebra::{Matrix3, Point3, Rotation3, SMatrix, SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Mat7 = SMatrix<f64, 7, 7>;
type Vec7 = SVector<f64, 7>;

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Levenberg-Marquardt over (log s, rotation increment, t) with the rotation
/// re-based after every accepted step.
fn lm_minimize(est: &[Point3<f64>], gt: &[Point3<f64>], r0: Matrix3<f64>) -> f64 {
    let mut log_s = 0.0;
    let mut rot = r0;
    let mut t = gt.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / gt.len() as f64
        - rot * (est.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / est.len() as f64);
    let cost = |ls: f64, r: &Matrix3<f64>, t: &Vector3<f64>| -> f64 {
        est.iter()
            .zip(gt)
            .map(|(e, g)| (g.coords - ls.exp() * (r * e.coords) - t).norm_squared())
            .sum()
    };
    let mut f = cost(log_s, &rot, &t);
    let mut mu = 1e-3;
    for _ in 0..500 {
        let s = log_s.exp();
        let mut jtj = Mat7::zeros();
        let mut jtr = Vec7::zeros();
        for (e, g) in est.iter().zip(gt) {
            let re = rot * e.coords;
            let r = g.coords - s * re - t;
            let mut j = SMatrix::<f64, 3, 7>::zeros();
            j.fixed_view_mut::<3, 1>(0, 0).copy_from(&(-s * re));
            j.fixed_view_mut::<3, 3>(0, 1).copy_from(&(s * rot * skew(&e.coords)));
            j.fixed_view_mut::<3, 3>(0, 4).copy_from(&(-Matrix3::identity()));
            jtj += j.transpose() * j;
            jtr += j.transpose() * r;
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut a = jtj;
            for i in 0..7 {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                mu *= 10.0;
                continue;
            };
            let cand_s = log_s + step[0];
            let cand_r = rot * Rotation3::new(Vector3::new(step[1], step[2], step[3])).into_inner();
            let cand_t = t + Vector3::new(step[4], step[5], step[6]);
            let fc = cost(cand_s, &cand_r, &cand_t);
            if fc < f {
                let done = f - fc <= 1e-16 * f.max(1e-300);
                log_s = cand_s;
                rot = cand_r;
                t = cand_t;
                f = fc;
                mu = (mu / 10.0).max(1e-12);
                improved = !done;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (f / est.len() as f64).sqrt()
}

fn multistart_gae(est: &[Point3<f64>], gt: &[Point3<f64>], rng: &mut ChaCha8Rng) -> f64 {
    let mut starts = vec![Matrix3::identity()];
    for _ in 0..8 {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        starts.push(Rotation3::new(axis.normalize() * angle).into_inner());
    }
    starts
        .into_iter()
        .map(|r0| lm_minimize(est, gt, r0))
        .fold(f64::INFINITY, f64::min)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
    (0..n)
        .map(|_| Point3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-3.0..3.0)))
        .collect()
}

fn random_similarity(rng: &mut ChaCha8Rng) -> Similarity {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Similarity {
        scale: 10f64.powf(rng.random_range(-1.0..1.0)),
        rotation: Rotation3::new(axis.normalize() * rng.random_range(0.0..3.1)).into_inner(),
        translation: Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0)),
    }
}

#[test]
fn closed_form_matches_iterative_minimum_on_noisy_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..30 {
        let n = rng.random_range(3..=20);
        let gt = random_points(&mut rng, n);
        let sim = random_similarity(&mut rng);
        let est: Vec<Point3<f64>> = gt
            .iter()
            .map(|p| {
                let noise = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                sim.apply(p) + noise
            })
            .collect();
        let closed = umeyama_align(&PoseTrajectory::from_positions(est.clone()), &PoseTrajectory::from_positions(gt.clone()))
            .unwrap();
        let numeric = multistart_gae(&est, &gt, &mut rng);
        assert!(
            (closed.gae - numeric).abs() < 1e-6,
            "case {case}: closed {} numeric {numeric}",
            closed.gae
        );
        let obj = alignment_objective(&est, &gt, &closed.transform);
        assert!((obj / n as f64).sqrt() - closed.gae < 1e-9);
    }
}

#[test]
fn recovers_exact_similarities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.random_range(3..=200);
        let est = random_points(&mut rng, n);
        let sim = random_similarity(&mut rng);
        let gt: Vec<Point3<f64>> = est.iter().map(|p| sim.apply(p)).collect();
        let a = umeyama_align(&PoseTrajectory::from_positions(est), &PoseTrajectory::from_positions(gt)).unwrap();
        assert!(a.gae < 1e-9, "gae {}", a.gae);
        assert!((a.transform.scale - sim.scale).abs() < 1e-9 * sim.scale);
    }
}

#[test]
fn pre_similarity_on_estimate_leaves_gae_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = rng.random_range(3..=60);
        let gt = random_points(&mut rng, n);
        let est: Vec<Point3<f64>> = gt
            .iter()
            .map(|p| p + Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-0.5..0.5)))
            .collect();
        let pre = random_similarity(&mut rng);
        let moved: Vec<Point3<f64>> = est.iter().map(|p| pre.apply(p)).collect();
        let gt = PoseTrajectory::from_positions(gt);
        let a = umeyama_align(&PoseTrajectory::from_positions(est), &gt).unwrap();
        let b = umeyama_align(&PoseTrajectory::from_positions(moved), &gt).unwrap();
        assert!((a.gae - b.gae).abs() < 1e-9, "{} vs {}", a.gae, b.gae);
    }
}

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{Pose, Quaternion};
use crate::{Error, Result};

fn centroid(pts: &[Vector3<f64>]) -> Vector3<f64> {
    pts.iter().sum::<Vector3<f64>>() / pts.len() as f64
}

pub(crate) fn check_not_collinear(pts: &[Vector3<f64>]) -> Result<()> {
    if pts.len() < 3 {
        return Err(Error::DegenerateKeypoints);
    }
    let c = centroid(pts);
    let scatter: Matrix3<f64> = pts.iter().map(|p| (p - c) * (p - c).transpose()).sum();
    let mut sv = scatter.singular_values().as_slice().to_vec();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-9 * sv[0] {
        return Err(Error::DegenerateKeypoints);
    }
    Ok(())
}

/// Least-squares rigid transform mapping `canonical` onto `observed`
/// (orthogonal Procrustes with a reflection guard).
pub fn rigid_align(observed: &[Vector3<f64>], canonical: &[Vector3<f64>]) -> Result<Pose> {
    if observed.len() != canonical.len() {
        return Err(Error::InvalidInput(format!(
            "{} observed keypoints for {} canonical keypoints",
            observed.len(),
            canonical.len()
        )));
    }
    check_not_collinear(canonical)?;
    let co = centroid(observed);
    let cc = centroid(canonical);
    let h: Matrix3<f64> = canonical
        .iter()
        .zip(observed)
        .map(|(c, o)| (c - cc) * (o - co).transpose())
        .sum();
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateKeypoints),
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = Quaternion::from_matrix(&r);
    Ok(Pose { rotation, translation: co - rotation.rotate(&cc) })
}

/// Orientation of the rigid body whose canonical keypoints best explain the
/// observed ones.
pub fn orientation_from_keypoints(observed: &[Vector3<f64>], canonical: &[Vector3<f64>]) -> Result<Quaternion> {
    Ok(rigid_align(observed, canonical)?.rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssdaf::default_multipoint_keypoints;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_q(rng: &mut ChaCha8Rng) -> Quaternion {
        Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    #[test]
    fn identity_when_observed_equals_canonical() {
        let k = default_multipoint_keypoints();
        assert!(orientation_from_keypoints(&k, &k).unwrap().rotation_eq(&Quaternion::identity(), 1e-12));
    }

    #[test]
    fn recovers_random_rotations_and_is_left_equivariant() {
        let k = default_multipoint_keypoints();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..500 {
            let r = random_q(&mut rng);
            let t = Vector3::new(rng.random_range(-1.0..1.0), 0.2, 0.5);
            let obs: Vec<_> = k.iter().map(|p| r.rotate(p) + t).collect();
            let pose = rigid_align(&obs, &k).unwrap();
            assert!(pose.rotation.rotation_eq(&r, 1e-9));
            assert!((pose.translation - t).norm() < 1e-9);

            let r2 = random_q(&mut rng);
            let obs2: Vec<_> = obs.iter().map(|p| r2.rotate(p)).collect();
            assert!(orientation_from_keypoints(&obs2, &k).unwrap().rotation_eq(&(r2 * r), 1e-9));
        }
    }

    #[test]
    fn millimeter_noise_stays_under_three_degrees() {
        // spread the keypoints to ~0.1 m as a rigid body would
        let k: Vec<Vector3<f64>> = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.1, 0.0, 0.0),
            Vector3::new(0.0, 0.1, 0.0),
            Vector3::new(0.0, 0.0, 0.1),
        ];
        let noise = Normal::new(0.0, 0.001).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let r = random_q(&mut rng);
            let obs: Vec<_> = k
                .iter()
                .map(|p| r.rotate(p) + Vector3::from_fn(|_, _| noise.sample(&mut rng)))
                .collect();
            worst = worst.max(orientation_from_keypoints(&obs, &k).unwrap().angle_to(&r));
        }
        assert!(worst < 3f64.to_radians(), "{}", worst.to_degrees());
    }

    #[test]
    fn collinear_canonical_rejected() {
        let line = vec![Vector3::zeros(), Vector3::new(0.1, 0.1, 0.0), Vector3::new(0.2, 0.2, 0.0)];
        assert!(matches!(orientation_from_keypoints(&line, &line), Err(Error::DegenerateKeypoints)));
        let two = vec![Vector3::zeros(), Vector3::x()];
        assert!(matches!(orientation_from_keypoints(&two, &two), Err(Error::DegenerateKeypoints)));
    }
}

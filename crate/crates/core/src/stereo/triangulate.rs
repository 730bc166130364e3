use nalgebra::{Matrix4x3, Vector3, Vector4};

use super::camera::StereoRig;
use super::StereoError;

const MAX_COND: f64 = 1e12;

/// Least-squares triangulation of undistorted left/right pixels into the
/// left-camera frame, solving `M X = b` stacked from both projections.
pub fn triangulate(
    rig: &StereoRig,
    left: (f64, f64),
    right: (f64, f64),
) -> Result<Vector3<f64>, StereoError> {
    let (kl, kr) = (&rig.left, &rig.right);
    let (r, t) = (&rig.pose.r, &rig.pose.t);
    let (xl, yl) = left;
    let (xr, yr) = right;
    let (ax, ay) = (kr.c1 - xr, kr.c2 - yr);
    let row3 = |j: usize| r[(0, j)] * kr.f1 + r[(1, j)] * kr.skew + r[(2, j)] * ax;
    let row4 = |j: usize| r[(1, j)] * kr.f2 + r[(2, j)] * ay;
    let m = Matrix4x3::new(
        kl.f1,
        kl.skew,
        kl.c1 - xl,
        0.0,
        kl.f2,
        kl.c2 - yl,
        row3(0),
        row3(1),
        row3(2),
        row4(0),
        row4(1),
        row4(2),
    );
    let b = Vector4::new(
        0.0,
        0.0,
        -(t.x * kr.f1 + t.y * kr.skew + t.z * ax),
        -(t.y * kr.f2 + t.z * ay),
    );
    let svd = m.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    // cond(M^T M) = cond(M)^2
    let cond = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(cond <= MAX_COND) {
        return Err(StereoError::DegenerateGeometry(cond));
    }
    let solve = |rhs: &Vector4<f64>| {
        svd.solve(rhs, 0.0)
            .map_err(|_| StereoError::DegenerateGeometry(cond))
    };
    // one round of iterative refinement recovers the digits lost to the
    // large spread between the pixel-scale and focal-scale entries
    let x = solve(&b)?;
    let x = x + solve(&(b - m * x))?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stereo::{Extrinsics, Intrinsics};
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn canonical(f: f64, b: f64) -> StereoRig {
        let k = Intrinsics::pinhole(f, 640.0, 480.0);
        StereoRig::new(k, k, Extrinsics::new(Matrix3::identity(), Vector3::new(-b, 0.0, 0.0)).unwrap())
            .unwrap()
    }

    #[test]
    fn canonical_depth_from_disparity() {
        let (f, b) = (1500.0, 120.0);
        let rig = canonical(f, b);
        for d in [5.0, 37.5, 150.0, 600.0] {
            let p = triangulate(&rig, (700.0, 500.0), (700.0 - d, 500.0)).unwrap();
            let z = f * b / d;
            assert!((p.z - z).abs() <= 1e-9 * z, "d={d}: {} vs {z}", p.z);
        }
    }

    #[test]
    fn parallel_rays_are_degenerate() {
        let rig = canonical(1000.0, 100.0);
        assert!(matches!(
            triangulate(&rig, (640.0, 480.0), (640.0, 480.0)),
            Err(StereoError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn round_trip_on_a_verged_rig() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let left = Intrinsics {
            skew: 0.5,
            ..Intrinsics::pinhole(2400.0, 1024.0, 768.0)
        };
        let right = Intrinsics {
            f2: 2410.0,
            ..Intrinsics::pinhole(2390.0, 1010.0, 770.0)
        };
        // 20 degree vergence about y, baseline 200 mm
        let r = *nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), -20f64.to_radians()).matrix();
        let rig = StereoRig::new(left, right, Extrinsics::new(r, Vector3::new(-200.0, 2.0, 35.0)).unwrap())
            .unwrap();
        for _ in 0..1000 {
            let p = Vector3::new(
                rng.random_range(-60.0..60.0),
                rng.random_range(-60.0..60.0),
                rng.random_range(500.0..700.0),
            );
            let (pl, pr) = rig.project(&p).unwrap();
            let q = triangulate(&rig, pl, pr).unwrap();
            assert!((q - p).amax() < 1e-6, "{p} -> {q}");
            let (ql, qr) = rig.project(&q).unwrap();
            assert!((ql.0 - pl.0).abs().max((qr.1 - pr.1).abs()) < 1e-6);
        }
    }
}

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::StereoError;

const MAX_UNDISTORT_ITER: usize = 20;
const UNDISTORT_TOL_PX: f64 = 1e-9;

/// Pinhole intrinsics with Brown radial/tangential distortion applied in
/// normalized image coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub f1: f64,
    pub f2: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub skew: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub k3: f64,
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
}

impl Intrinsics {
    pub fn pinhole(f: f64, c1: f64, c2: f64) -> Self {
        Self {
            f1: f,
            f2: f,
            c1,
            c2,
            skew: 0.0,
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            p1: 0.0,
            p2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), StereoError> {
        let all = [
            self.f1, self.f2, self.c1, self.c2, self.skew, self.k1, self.k2, self.k3, self.p1,
            self.p2,
        ];
        if !(self.f1 > 0.0 && self.f2 > 0.0) || all.iter().any(|v| !v.is_finite()) {
            return Err(StereoError::InvalidCamera(format!(
                "focal lengths must be positive and all parameters finite: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        [self.k1, self.k2, self.k3, self.p1, self.p2]
            .iter()
            .any(|v| *v != 0.0)
    }

    /// Camera matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.f1, self.skew, self.c1, 0.0, self.f2, self.c2, 0.0, 0.0, 1.0,
        )
    }

    /// Distorts normalized coordinates.
    pub fn distort_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        (
            x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x),
            y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y,
        )
    }

    fn distort_jacobian(&self, x: f64, y: f64) -> Matrix2<f64> {
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        // d radial / d r2
        let dr = self.k1 + r2 * (2.0 * self.k2 + 3.0 * self.k3 * r2);
        Matrix2::new(
            radial + 2.0 * x * x * dr + 2.0 * self.p1 * y + 6.0 * self.p2 * x,
            2.0 * x * y * dr + 2.0 * self.p1 * x + 2.0 * self.p2 * y,
            2.0 * x * y * dr + 2.0 * self.p1 * x + 2.0 * self.p2 * y,
            radial + 2.0 * y * y * dr + 6.0 * self.p1 * y + 2.0 * self.p2 * x,
        )
    }

    pub fn normalized_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (self.f1 * x + self.skew * y + self.c1, self.f2 * y + self.c2)
    }

    pub fn pixel_to_normalized(&self, u: f64, v: f64) -> (f64, f64) {
        let y = (v - self.c2) / self.f2;
        ((u - self.c1 - self.skew * y) / self.f1, y)
    }

    /// Applies lens distortion to an ideal pixel position.
    pub fn distort(&self, u: f64, v: f64) -> (f64, f64) {
        let (x, y) = self.pixel_to_normalized(u, v);
        let (xd, yd) = self.distort_normalized(x, y);
        self.normalized_to_pixel(xd, yd)
    }

    /// Ideal pixel whose distorted image is `(u, v)`, by Newton iteration.
    pub fn undistort(&self, u: f64, v: f64) -> Result<(f64, f64), StereoError> {
        if !self.has_distortion() {
            return Ok((u, v));
        }
        let (tx, ty) = self.pixel_to_normalized(u, v);
        let target = Vector2::new(tx, ty);
        let mut p = target;
        // tolerance in normalized units equivalent to UNDISTORT_TOL_PX
        let tol = UNDISTORT_TOL_PX / self.f1.max(self.f2);
        for _ in 0..MAX_UNDISTORT_ITER {
            let (dx, dy) = self.distort_normalized(p.x, p.y);
            let d = Vector2::new(dx, dy);
            let r = d - target;
            if r.amax() < 0.5 * tol {
                return Ok(self.normalized_to_pixel(p.x, p.y));
            }
            let step = self
                .distort_jacobian(p.x, p.y)
                .lu()
                .solve(&r)
                .ok_or(StereoError::NoConvergence { x: u, y: v })?;
            p -= step;
            if !p.iter().all(|c| c.is_finite()) {
                break;
            }
        }
        Err(StereoError::NoConvergence { x: u, y: v })
    }

    /// Projects a point given in camera coordinates.
    pub fn project_camera(&self, pc: &Vector3<f64>) -> Result<(f64, f64), StereoError> {
        if !(pc.z > 0.0) {
            return Err(StereoError::BehindCamera(pc.z));
        }
        let (xd, yd) = self.distort_normalized(pc.x / pc.z, pc.y / pc.z);
        Ok(self.normalized_to_pixel(xd, yd))
    }

    /// Projects a world point seen from pose `extr`.
    pub fn project(&self, extr: &Extrinsics, p: &Vector3<f64>) -> Result<(f64, f64), StereoError> {
        self.project_camera(&extr.apply(p))
    }
}

/// World-to-camera pose `X_c = R X + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrinsics {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            r: Matrix3::identity(),
            t: Vector3::zeros(),
        }
    }

    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, StereoError> {
        let orth = (r.transpose() * r - Matrix3::identity()).amax();
        let det = r.determinant();
        if !(orth <= 1e-9 && (det - 1.0).abs() <= 1e-9) || !t.iter().all(|v| v.is_finite()) {
            return Err(StereoError::InvalidCamera(format!(
                "R is not a rotation (|R^T R - I| = {orth:.3e}, det = {det})"
            )));
        }
        Ok(Self { r, t })
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r * p + self.t
    }
}

/// Relative pose mapping left-camera coordinates to right-camera
/// coordinates: `R = R_r R_l^-1`, `t = t_r - R t_l`.
pub fn stereo_extrinsics(left: &Extrinsics, right: &Extrinsics) -> Extrinsics {
    // rotation inverse is the transpose
    let r = right.r * left.r.transpose();
    Extrinsics {
        r,
        t: right.t - r * left.t,
    }
}

/// Calibrated two-camera rig; the world frame is the left camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StereoRig {
    pub left: Intrinsics,
    pub right: Intrinsics,
    /// Right-from-left pose.
    pub pose: Extrinsics,
}

impl StereoRig {
    pub fn new(left: Intrinsics, right: Intrinsics, pose: Extrinsics) -> Result<Self, StereoError> {
        left.validate()?;
        right.validate()?;
        let pose = Extrinsics::new(pose.r, pose.t)?;
        if !(pose.t.norm() > 0.0) {
            return Err(StereoError::InvalidCamera("baseline is zero".into()));
        }
        Ok(Self { left, right, pose })
    }

    /// Projects a world point into both cameras.
    pub fn project(&self, p: &Vector3<f64>) -> Result<((f64, f64), (f64, f64)), StereoError> {
        Ok((
            self.left.project_camera(p)?,
            self.right.project(&self.pose, p)?,
        ))
    }
}

/// Calibration file layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub left: Intrinsics,
    pub right: Intrinsics,
    pub stereo: StereoPose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StereoPose {
    /// Row-major rotation.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl CalibrationFile {
    pub fn to_rig(&self) -> Result<StereoRig, StereoError> {
        let pose = Extrinsics {
            r: Matrix3::from_row_slice(&self.stereo.r),
            t: Vector3::from(self.stereo.t),
        };
        StereoRig::new(self.left, self.right, pose)
    }

    pub fn from_rig(rig: &StereoRig) -> Self {
        let mut r = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[3 * i + j] = rig.pose.r[(i, j)];
            }
        }
        Self {
            left: rig.left,
            right: rig.right,
            stereo: StereoPose {
                r,
                t: [rig.pose.t.x, rig.pose.t.y, rig.pose.t.z],
            },
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Matrix3<f64> {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(-max_angle..max_angle);
        *Rotation3::from_scaled_axis(axis.normalize() * angle).matrix()
    }

    fn distorted() -> Intrinsics {
        Intrinsics {
            k1: -0.12,
            k2: 0.03,
            k3: -0.004,
            p1: 1e-3,
            p2: -5e-4,
            skew: 0.4,
            ..Intrinsics::pinhole(1200.0, 640.0, 480.0)
        }
    }

    #[test]
    fn principal_point_and_hand_projection() {
        let k = Intrinsics::pinhole(1000.0, 512.0, 512.0);
        let id = Extrinsics::identity();
        assert_eq!(k.project(&id, &Vector3::new(0.0, 0.0, 3.0)).unwrap(), (512.0, 512.0));
        assert_eq!(k.project(&id, &Vector3::new(0.1, 0.0, 1.0)).unwrap(), (612.0, 512.0));
        assert!(matches!(
            k.project(&id, &Vector3::new(0.0, 0.0, -1.0)),
            Err(StereoError::BehindCamera(_))
        ));
    }

    #[test]
    fn radial_distortion_matches_direct_formula() {
        let k = Intrinsics {
            k1: -0.1,
            ..Intrinsics::pinhole(1000.0, 512.0, 512.0)
        };
        let p = Vector3::new(0.2, -0.1, 1.0);
        let (u, v) = k.project(&Extrinsics::identity(), &p).unwrap();
        // normalized point scaled by 1 + k1 r^2
        let s = 1.0 - 0.1 * (0.04 + 0.01);
        assert!((u - (512.0 + 1000.0 * 0.2 * s)).abs() < 1e-9);
        assert!((v - (512.0 - 1000.0 * 0.1 * s)).abs() < 1e-9);
    }

    #[test]
    fn undistort_inverts_distort() {
        let k = distorted();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (u, v) = (rng.random_range(0.0..1280.0), rng.random_range(0.0..960.0));
            let (iu, iv) = k.undistort(u, v).unwrap();
            let (du, dv) = k.distort(iu, iv);
            assert!((du - u).abs() <= 1e-9 && (dv - v).abs() <= 1e-9, "{u} {v}");
        }
        let plain = Intrinsics::pinhole(900.0, 10.0, 20.0);
        assert_eq!(plain.undistort(33.3, 44.4).unwrap(), (33.3, 44.4));
    }

    #[test]
    fn pure_k1_inverse_matches_cardano() {
        let k1 = 0.08;
        let k = Intrinsics {
            k1,
            ..Intrinsics::pinhole(1000.0, 500.0, 500.0)
        };
        let (u, v) = (1100.0, 850.0);
        let (xd, yd): (f64, f64) = ((u - 500.0) / 1000.0, (v - 500.0) / 1000.0);
        let rd = (xd * xd + yd * yd).sqrt();
        // k1 r^3 + r - rd = 0, depressed cubic r^3 + p r + q = 0
        let (p, q) = (1.0 / k1, -rd / k1);
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        let r = (-q / 2.0 + disc.sqrt()).cbrt() + (-q / 2.0 - disc.sqrt()).cbrt();
        let (iu, iv) = k.undistort(u, v).unwrap();
        assert!((iu - (500.0 + 1000.0 * xd * r / rd)).abs() < 1e-8);
        assert!((iv - (500.0 + 1000.0 * yd * r / rd)).abs() < 1e-8);
    }

    #[test]
    fn extrinsics_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Extrinsics::new(random_rotation(&mut rng, 3.0), Vector3::new(1.0, -2.0, 30.0)).unwrap();
        let same = stereo_extrinsics(&a, &a);
        assert!((same.r - Matrix3::identity()).amax() < 1e-12 && same.t.amax() < 1e-12);
        let b = Extrinsics::new(random_rotation(&mut rng, 3.0), Vector3::new(-40.0, 1.0, 28.0)).unwrap();
        let rel = stereo_extrinsics(&Extrinsics::identity(), &b);
        assert!((rel.r - b.r).amax() < 1e-15 && (rel.t - b.t).amax() < 1e-15);
        let rel = stereo_extrinsics(&a, &b);
        for _ in 0..10 {
            let x = Vector3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            );
            assert!((rel.apply(&a.apply(&x)) - b.apply(&x)).amax() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_rotation_and_baseline() {
        let bad = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Extrinsics::new(bad, Vector3::zeros()).is_err());
        let k = Intrinsics::pinhole(1000.0, 0.0, 0.0);
        assert!(StereoRig::new(k, k, Extrinsics::identity()).is_err());
    }

    #[cfg(feature = "io")]
    #[test]
    fn calibration_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rig = StereoRig::new(
            distorted(),
            Intrinsics::pinhole(1000.0, 512.0, 400.0),
            Extrinsics::new(random_rotation(&mut rng, 0.5), Vector3::new(-100.0, 0.0, 5.0)).unwrap(),
        )
        .unwrap();
        let json = serde_json::to_string(&CalibrationFile::from_rig(&rig)).unwrap();
        assert!(json.contains("\"R\""));
        let back: CalibrationFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_rig().unwrap(), rig);
    }
}

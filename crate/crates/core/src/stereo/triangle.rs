use nalgebra::{Matrix2, Vector3};

use super::StereoError;

/// Strain of one surface triangle between two configurations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleStrain {
    /// Deformation gradient from the reference to the deformed tangent frame.
    pub f: Matrix2<f64>,
    /// Right Cauchy-Green tensor `F^T F`.
    pub c: Matrix2<f64>,
    /// Left Cauchy-Green tensor `F F^T`.
    pub b: Matrix2<f64>,
    /// Green-Lagrange strain `(C - I) / 2`.
    pub e_green: Matrix2<f64>,
    /// Euler-Almansi strain `(I - B^-1) / 2`.
    pub e_almansi: Matrix2<f64>,
    /// Principal stretches, largest first.
    pub stretches: [f64; 2],
    /// Principal Green-Lagrange strains, largest first.
    pub principal_green: [f64; 2],
    /// Principal Euler-Almansi strains, largest first.
    pub principal_almansi: [f64; 2],
    /// `(E1 - E2) / 2`.
    pub max_shear: f64,
    /// Deformed over reference area, `det F`.
    pub area_change: f64,
}

/// Edge vectors of a triangle in its own orthonormal tangent frame: the
/// first axis along the first edge, the second completing the in-plane
/// right-handed pair.
fn local_edges(tri: &[Vector3<f64>; 3]) -> Result<Matrix2<f64>, StereoError> {
    let a = tri[1] - tri[0];
    let b = tri[2] - tri[0];
    let n = a.cross(&b);
    let scale = a.norm_squared().max(b.norm_squared());
    if !(n.norm() > 1e-12 * scale) {
        return Err(StereoError::DegenerateTriangle);
    }
    let e1 = a.normalize();
    let e2 = n.normalize().cross(&e1);
    Ok(Matrix2::new(e1.dot(&a), e1.dot(&b), e2.dot(&a), e2.dot(&b)))
}

fn sym_eigen_desc(m: &Matrix2<f64>) -> [f64; 2] {
    let mid = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let rad = (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    [mid + rad, mid - rad]
}

/// Constant-strain (Cosserat point) triangle: `F` maps the reference edge
/// vectors onto the deformed ones, each expressed in its triangle's frame.
pub fn triangle_strain(
    reference: &[Vector3<f64>; 3],
    deformed: &[Vector3<f64>; 3],
) -> Result<TriangleStrain, StereoError> {
    let d_ref = local_edges(reference)?;
    let d_def = local_edges(deformed)?;
    let f = d_def * d_ref.try_inverse().ok_or(StereoError::DegenerateTriangle)?;
    let c = f.transpose() * f;
    let b = f * f.transpose();
    let id = Matrix2::identity();
    let b_inv = b.try_inverse().ok_or(StereoError::DegenerateTriangle)?;
    let e_green = 0.5 * (c - id);
    let e_almansi = 0.5 * (id - b_inv);
    let lam2 = sym_eigen_desc(&c);
    let stretches = [lam2[0].sqrt(), lam2[1].sqrt()];
    let principal_green = [0.5 * (lam2[0] - 1.0), 0.5 * (lam2[1] - 1.0)];
    let principal_almansi = [0.5 * (1.0 - 1.0 / lam2[0]), 0.5 * (1.0 - 1.0 / lam2[1])];
    Ok(TriangleStrain {
        f,
        c,
        b,
        e_green,
        e_almansi,
        stretches,
        principal_green,
        principal_almansi,
        max_shear: 0.5 * (principal_green[0] - principal_green[1]),
        area_change: f.determinant(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stereo::camera::tests::random_rotation;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri() -> [Vector3<f64>; 3] {
        [
            Vector3::new(1.0, 2.0, 3.0),
            Vector3::new(4.0, 2.5, 3.2),
            Vector3::new(1.5, 5.0, 2.1),
        ]
    }

    #[test]
    fn identity() {
        let s = triangle_strain(&tri(), &tri()).unwrap();
        assert!(s.e_green.amax() < 1e-14 && s.e_almansi.amax() < 1e-14);
        assert!((s.stretches[0] - 1.0).abs() < 1e-14 && (s.stretches[1] - 1.0).abs() < 1e-14);
        assert!((s.area_change - 1.0).abs() < 1e-14);
    }

    #[test]
    fn uniaxial_stretch_along_an_edge() {
        let t = tri();
        let dir = (t[1] - t[0]).normalize();
        let stretch = |p: Vector3<f64>| {
            let d = p - t[0];
            t[0] + d + 0.1 * dir * dir.dot(&d)
        };
        let def = [stretch(t[0]), stretch(t[1]), stretch(t[2])];
        let s = triangle_strain(&t, &def).unwrap();
        assert!((s.principal_green[0] - 0.105).abs() < 1e-10, "{:?}", s.principal_green);
        assert!(s.principal_green[1].abs() < 1e-10);
        assert!((s.stretches[0] - 1.1).abs() < 1e-12);
        assert!((s.area_change - 1.1).abs() < 1e-12);
    }

    #[test]
    fn degenerate_triangles() {
        let line = [Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), Vector3::new(2.0, 0.0, 0.0)];
        assert_eq!(triangle_strain(&line, &tri()), Err(StereoError::DegenerateTriangle));
        assert_eq!(triangle_strain(&tri(), &line), Err(StereoError::DegenerateTriangle));
    }

    proptest! {
        #[test]
        fn rigid_motion_gives_zero_strain(seed in 0u64..10_000, tx in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_rotation(&mut rng, 3.1);
            let t = tri();
            let def = t.map(|p| r * p + Vector3::new(tx, -2.0 * tx, 0.5));
            let s = triangle_strain(&t, &def).unwrap();
            prop_assert!(s.e_green.amax() < 1e-10 && s.e_almansi.amax() < 1e-10);
        }

        #[test]
        fn tensors_are_consistent(
            seed in 0u64..10_000,
            a in 0.8f64..1.3, b in 0.8f64..1.3, g in -0.2f64..0.2,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_rotation(&mut rng, 3.1);
            let t = tri();
            let lin = nalgebra::Matrix3::new(a, g, 0.0, 0.0, b, 0.0, 0.0, 0.0, 1.0);
            let def = t.map(|p| r * (lin * p));
            let s = triangle_strain(&t, &def).unwrap();
            let f_inv = s.f.try_inverse().unwrap();
            let pushed = f_inv.transpose() * s.e_green * f_inv;
            prop_assert!((pushed - s.e_almansi).amax() < 1e-9);
            // relabeling the vertices keeps the principal values
            let rt = [t[1], t[2], t[0]];
            let rd = [def[1], def[2], def[0]];
            let s2 = triangle_strain(&rt, &rd).unwrap();
            prop_assert!((s2.principal_green[0] - s.principal_green[0]).abs() < 1e-10);
            prop_assert!((s2.principal_green[1] - s.principal_green[1]).abs() < 1e-10);
            prop_assert!((s2.area_change - s.area_change).abs() < 1e-10);
        }
    }
}

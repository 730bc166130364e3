use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::matching::{VolDisplacement, VolGrid};
use super::DvcError;

const MIN_NEIGHBOURS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolStrainMeasure {
    /// `0.5 (grad u + grad u^T)`.
    #[default]
    Small,
    /// `0.5 (F^T F - I)` with `F = I + grad u`.
    GreenLagrange,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolStrain {
    pub grid: VolGrid,
    /// Displacement gradient `du_i/dx_j` per point.
    pub gradient: Vec<Matrix3<f64>>,
    pub strain: Vec<Matrix3<f64>>,
    pub valid: Vec<bool>,
}

/// Quadratic least-squares fit of each displacement component over the
/// valid points within `radius` lattice steps (Euclidean); the strain
/// comes from the fitted linear terms.
pub fn vol_strain(
    disp: &VolDisplacement,
    radius: usize,
    measure: VolStrainMeasure,
) -> Result<VolStrain, DvcError> {
    let g = &disp.grid;
    let n = g.len();
    let mut out = VolStrain {
        grid: g.clone(),
        gradient: vec![Matrix3::from_element(f64::NAN); n],
        strain: vec![Matrix3::from_element(f64::NAN); n],
        valid: vec![false; n],
    };
    let r = radius as i64;
    let h = g.spacing as f64;
    let (ci, cj, ck) = (g.counts.0 as i64, g.counts.1 as i64, g.counts.2 as i64);
    for idx in 0..n {
        if !disp.valid[idx] {
            continue;
        }
        let (i, j, k) = g.ijk(idx);
        let mut rows: Vec<[f64; 10]> = Vec::new();
        let mut vals: Vec<[f64; 3]> = Vec::new();
        for dk in -r..=r {
            for dj in -r..=r {
                for di in -r..=r {
                    if di * di + dj * dj + dk * dk > r * r {
                        continue;
                    }
                    let (a, b, c) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    if a < 0 || b < 0 || c < 0 || a >= ci || b >= cj || c >= ck {
                        continue;
                    }
                    let o = g.index(a as usize, b as usize, c as usize);
                    if !disp.valid[o] {
                        continue;
                    }
                    let (x, y, z) = (di as f64, dj as f64, dk as f64);
                    rows.push([1.0, x, y, z, x * x, y * y, z * z, x * y, x * z, y * z]);
                    vals.push([disp.u[o], disp.v[o], disp.w[o]]);
                }
            }
        }
        if rows.len() < MIN_NEIGHBOURS {
            continue;
        }
        let a = DMatrix::from_fn(rows.len(), 10, |r, c| rows[r][c]);
        let svd = a.svd(true, true);
        let sv = &svd.singular_values;
        if !(sv.min() > 1e-10 * sv.max()) {
            continue;
        }
        let mut grad = Matrix3::zeros();
        for comp in 0..3 {
            let b = DVector::from_iterator(vals.len(), vals.iter().map(|v| v[comp]));
            let Ok(c) = svd.solve(&b, 0.0) else { continue };
            for d in 0..3 {
                grad[(comp, d)] = c[1 + d] / h;
            }
        }
        let strain = match measure {
            VolStrainMeasure::Small => 0.5 * (grad + grad.transpose()),
            VolStrainMeasure::GreenLagrange => {
                let f = Matrix3::identity() + grad;
                0.5 * (f.transpose() * f - Matrix3::identity())
            }
        };
        out.gradient[idx] = grad;
        out.strain[idx] = strain;
        out.valid[idx] = true;
    }
    if !out.valid.iter().any(|v| *v) {
        return Err(DvcError::InsufficientSupport);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvc::VolCriterion;
    use proptest::prelude::*;

    fn field(f: impl Fn(f64, f64, f64) -> [f64; 3]) -> VolDisplacement {
        let grid = VolGrid {
            origin: (5, 5, 5),
            spacing: 3,
            counts: (7, 6, 5),
            m: 4,
        };
        let n = grid.len();
        let mut d = VolDisplacement {
            grid,
            criterion: VolCriterion::Nccc,
            u: vec![0.0; n],
            v: vec![0.0; n],
            w: vec![0.0; n],
            cost: vec![1.0; n],
            valid: vec![true; n],
        };
        for i in 0..n {
            let (x, y, z) = d.grid.point(i);
            let u = f(x as f64, y as f64, z as f64);
            d.u[i] = u[0];
            d.v[i] = u[1];
            d.w[i] = u[2];
        }
        d
    }

    #[test]
    fn translation_and_stretch() {
        let s = vol_strain(&field(|_, _, _| [1.0, -2.0, 0.5]), 2, VolStrainMeasure::Small).unwrap();
        assert!(s.valid.iter().all(|v| *v));
        assert!(s.strain.iter().all(|e| e.amax() < 1e-12));
        let s = vol_strain(&field(|x, _, _| [0.01 * x, 0.0, 0.0]), 2, VolStrainMeasure::Small).unwrap();
        for e in &s.strain {
            assert!((e[(0, 0)] - 0.01).abs() < 1e-8);
            assert!(e.iter().skip(1).all(|v| v.abs() < 1e-8));
        }
        let gl = vol_strain(&field(|x, _, _| [0.01 * x, 0.0, 0.0]), 2, VolStrainMeasure::GreenLagrange).unwrap();
        assert!((gl.strain[0][(0, 0)] - 0.01005).abs() < 1e-10);
    }

    #[test]
    fn smooth_field_matches_finite_differences() {
        let f = |x: f64, y: f64, z: f64| {
            [
                0.3 * (x / 9.0).sin() + 0.01 * y,
                0.2 * (y / 11.0).cos() * (z / 13.0).sin(),
                0.1 * ((x + z) / 10.0).sin(),
            ]
        };
        let d = field(f);
        let s = vol_strain(&d, 2, VolStrainMeasure::Small).unwrap();
        let eps = 1e-4;
        for idx in 0..d.grid.len() {
            let (x, y, z) = d.grid.point(idx);
            let p = [x as f64, y as f64, z as f64];
            for dir in 0..3 {
                let (mut a, mut b) = (p, p);
                a[dir] += eps;
                b[dir] -= eps;
                let (fa, fb) = (f(a[0], a[1], a[2]), f(b[0], b[1], b[2]));
                for comp in 0..3 {
                    let fd = (fa[comp] - fb[comp]) / (2.0 * eps);
                    assert!((s.gradient[idx][(comp, dir)] - fd).abs() < 1e-3);
                }
            }
        }
    }

    #[test]
    fn insufficient_support() {
        let mut d = field(|_, _, _| [0.0; 3]);
        d.valid.iter_mut().enumerate().for_each(|(i, v)| *v = i % 5 == 0);
        assert!(matches!(vol_strain(&d, 1, VolStrainMeasure::Small), Err(DvcError::InsufficientSupport)));
    }

    proptest! {
        #[test]
        fn affine_fields_are_exact(c in proptest::collection::vec(-0.05f64..0.05, 12)) {
            let d = field(|x, y, z| {
                [
                    c[0] + c[1] * x + c[2] * y + c[3] * z,
                    c[4] + c[5] * x + c[6] * y + c[7] * z,
                    c[8] + c[9] * x + c[10] * y + c[11] * z,
                ]
            });
            let s = vol_strain(&d, 2, VolStrainMeasure::Small).unwrap();
            for g in &s.gradient {
                for comp in 0..3 {
                    for dir in 0..3 {
                        prop_assert!((g[(comp, dir)] - c[4 * comp + 1 + dir]).abs() < 1e-10);
                    }
                }
            }
        }
    }
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::williams::mode_i_basis;
use super::{CrackTip, MaterialElastic, MechError};
use crate::dic2d::DisplacementField;
use crate::linalg::lstsq;

const MIN_POINTS: usize = 20;

/// Radial band around the tip used for fitting, in grid length units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub r_min: f64,
    pub r_max: f64,
}

impl Annulus {
    /// 5 to 20 grid spacings: clear of the process zone, short of the
    /// specimen boundary.
    pub fn for_spacing(spacing: usize) -> Self {
        Self {
            r_min: 5.0 * spacing as f64,
            r_max: 20.0 * spacing as f64,
        }
    }
}

/// Stress intensity factor and rigid-body terms, expressed in the crack
/// frame of the tip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SifFit {
    pub k_i: f64,
    pub ux0: f64,
    pub uy0: f64,
    pub theta0: f64,
    pub points: usize,
    pub rms_residual: f64,
}

/// Linear least squares of the mode-I displacement field plus rigid motion
/// over every valid point of the annulus, both components.
pub fn sif_fit(
    disp: &DisplacementField,
    tip: &CrackTip,
    mat: &MaterialElastic,
    annulus: Annulus,
) -> Result<SifFit, MechError> {
    mat.validate()?;
    if !(annulus.r_min >= 0.0 && annulus.r_max > annulus.r_min) {
        return Err(MechError::Invalid("annulus needs 0 <= r_min < r_max".into()));
    }
    let (mu, kappa) = (mat.mu(), mat.kappa());
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut rhs = Vec::new();
    let g = &disp.grid;
    for i in 0..g.len() {
        if !disp.valid[i] {
            continue;
        }
        let (x, y) = g.point(i);
        let (s, n) = tip.to_local(x as f64, y as f64);
        let r = s.hypot(n);
        if r < annulus.r_min || r > annulus.r_max {
            continue;
        }
        let (fx, fy) = mode_i_basis(r, n.atan2(s), kappa);
        let (us, un) = tip.rotate_in(disp.u[i], disp.v[i]);
        rows.push([fx / (2.0 * mu), 1.0, 0.0, -n]);
        rhs.push(us);
        rows.push([fy / (2.0 * mu), 0.0, 1.0, s]);
        rhs.push(un);
    }
    let points = rows.len() / 2;
    if points < MIN_POINTS {
        return Err(MechError::TooFewPoints(points, MIN_POINTS));
    }
    let a = DMatrix::from_fn(rows.len(), 4, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    // scale columns so the conditioning test sees the geometry, not units
    let scale: Vec<f64> = (0..4).map(|c| a.column(c).norm().max(f64::MIN_POSITIVE)).collect();
    let an = DMatrix::from_fn(a.nrows(), 4, |r, c| a[(r, c)] / scale[c]);
    let x = lstsq(&an, &b, 1e10).ok_or(MechError::RankDeficient)?;
    let p: Vec<f64> = (0..4).map(|c| x[c] / scale[c]).collect();
    let res = &b - &a * DVector::from_column_slice(&p);
    Ok(SifFit {
        k_i: p[0],
        ux0: p[1],
        uy0: p[2],
        theta0: p[3],
        points,
        rms_residual: (res.norm_squared() / res.len() as f64).sqrt(),
    })
}

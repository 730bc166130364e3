use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::grid::{DisplacementField, RoiGrid};
use super::DicError;

/// Default strain window radius, in grid points. Larger windows suppress
/// more noise but smear strain gradients.
pub const DEFAULT_STRAIN_WINDOW: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrainField {
    pub grid: RoiGrid,
    pub window_radius: usize,
    pub exx: Vec<f64>,
    pub exy: Vec<f64>,
    pub eyy: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Green-Lagrange strains `(e_xx, e_xy, e_yy)` from displacement gradients.
pub fn green_lagrange(ux: f64, uy: f64, vx: f64, vy: f64) -> (f64, f64, f64) {
    (
        0.5 * (2.0 * ux + ux * ux + vx * vx),
        0.5 * (uy + vx + ux * uy + vx * vy),
        0.5 * (2.0 * vy + uy * uy + vy * vy),
    )
}

/// Least-squares plane fits of `u` and `v` over the valid points within a
/// circular window of `window_radius` grid points around each valid point.
/// Only points sharing the center's partition label enter a window, so
/// fits never straddle a crack that separates labelled regions.
///
/// Points with fewer than 6 samples or a degenerate sample layout stay
/// invalid.
pub fn strain_field(disp: &DisplacementField, window_radius: usize) -> Result<StrainField, DicError> {
    if window_radius == 0 {
        return Err(DicError::InvalidOptions("strain window radius must be >= 1".into()));
    }
    let g = &disp.grid;
    let n = g.len();
    let nan = vec![f64::NAN; n];
    let mut out = StrainField {
        grid: g.clone(),
        window_radius,
        exx: nan.clone(),
        exy: nan.clone(),
        eyy: nan.clone(),
        ux: nan.clone(),
        uy: nan.clone(),
        vx: nan.clone(),
        vy: nan,
        valid: vec![false; n],
    };
    let r = window_radius as i64;
    let h = g.spacing as f64;
    for i in 0..n {
        if !disp.valid[i] {
            continue;
        }
        let (row, col) = g.row_col(i);
        let mut ata = Matrix3::zeros();
        let mut atu = Vector3::zeros();
        let mut atv = Vector3::zeros();
        let mut count = 0;
        for dr in -r..=r {
            for dc in -r..=r {
                if dr * dr + dc * dc > r * r {
                    continue;
                }
                let (rr, cc) = (row as i64 + dr, col as i64 + dc);
                if rr < 0 || cc < 0 || rr >= g.rows as i64 || cc >= g.cols as i64 {
                    continue;
                }
                let j = g.index(rr as usize, cc as usize);
                if !disp.valid[j] || g.labels[j] != g.labels[i] {
                    continue;
                }
                // offsets in grid units keep the normal matrix well scaled
                let a = Vector3::new(1.0, dc as f64, dr as f64);
                ata += a * a.transpose();
                atu += a * disp.u[j];
                atv += a * disp.v[j];
                count += 1;
            }
        }
        if count < 6 {
            continue;
        }
        let eig = ata.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 1e-10 * hi) {
            continue;
        }
        let Some(chol) = ata.cholesky() else { continue };
        let cu = chol.solve(&atu);
        let cv = chol.solve(&atv);
        let (ux, uy, vx, vy) = (cu[1] / h, cu[2] / h, cv[1] / h, cv[2] / h);
        let (exx, exy, eyy) = green_lagrange(ux, uy, vx, vy);
        out.ux[i] = ux;
        out.uy[i] = uy;
        out.vx[i] = vx;
        out.vy[i] = vy;
        out.exx[i] = exx;
        out.exy[i] = exy;
        out.eyy[i] = eyy;
        out.valid[i] = true;
    }
    if !out.valid.iter().any(|v| *v) {
        return Err(DicError::InsufficientSupport);
    }
    Ok(out)
}

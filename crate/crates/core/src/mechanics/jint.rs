use serde::{Deserialize, Serialize};

use super::{CrackTip, MaterialElastic, MechError};
use crate::dic2d::{DisplacementField, StrainField};

/// Square rings centred on the tip and aligned with the crack, half-widths
/// in grid length units. The weight `q1` is 1 inside the inner ring, 0
/// outside the outer ring and the product of two linear ramps between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JIntegralDomain {
    pub tip: CrackTip,
    pub inner: f64,
    pub outer: f64,
}

impl JIntegralDomain {
    pub fn new(tip: CrackTip, inner: f64, outer: f64) -> Result<Self, MechError> {
        if !(inner > 0.0 && outer > inner) {
            return Err(MechError::Invalid("J domain needs 0 < inner < outer".into()));
        }
        Ok(Self { tip, inner, outer })
    }

    pub fn q(&self, x: f64, y: f64) -> f64 {
        let (s, n) = self.tip.to_local(x, y);
        let ramp = |d: f64| ((self.outer - d.abs()) / (self.outer - self.inner)).clamp(0.0, 1.0);
        ramp(s) * ramp(n)
    }
}

/// Where stresses come from.
pub enum StressInput<'a> {
    /// `sigma = C eps` from the strain field; `W = sigma : eps / 2`.
    Elastic(MaterialElastic),
    /// Per grid point, aligned histories of stress and strain tensors
    /// `[xx, yy, xy]` (for example from `visco_stress`). The last entry is the
    /// current state and `W` is the trapezoid integral along the history.
    History {
        stress: &'a [Vec<[f64; 3]>],
        strain: &'a [Vec<[f64; 3]>],
    },
}

/// Trapezoid `W = int sigma_ij d eps_ij` along a tensor path.
fn tensor_energy(stress: &[[f64; 3]], strain: &[[f64; 3]]) -> f64 {
    let mut w = 0.0;
    for k in 1..stress.len().min(strain.len()) {
        let (s0, s1, e0, e1) = (stress[k - 1], stress[k], strain[k - 1], strain[k]);
        for c in 0..3 {
            let weight = if c == 2 { 2.0 } else { 1.0 };
            w += weight * 0.5 * (s0[c] + s1[c]) * (e1[c] - e0[c]);
        }
    }
    w
}

/// Central difference of displacements along one grid direction, falling
/// back to a one-sided difference when a neighbour is invalid or in another
/// partition (the opposite crack face).
fn derivative(disp: &DisplacementField, i: usize, dr: i64, dc: i64) -> Option<(f64, f64)> {
    let g = &disp.grid;
    let (r, c) = g.row_col(i);
    let h = g.spacing as f64;
    let usable = |k: i64| -> Option<usize> {
        let (rr, cc) = (r as i64 + k * dr, c as i64 + k * dc);
        if rr < 0 || cc < 0 || rr >= g.rows as i64 || cc >= g.cols as i64 {
            return None;
        }
        let j = g.index(rr as usize, cc as usize);
        (disp.valid[j] && g.labels[j] == g.labels[i]).then_some(j)
    };
    let d = |a: usize, b: usize, span: f64| ((disp.u[b] - disp.u[a]) / span, (disp.v[b] - disp.v[a]) / span);
    match (usable(-1), usable(1)) {
        (Some(a), Some(b)) => Some(d(a, b, 2.0 * h)),
        (None, Some(b)) => Some(d(i, b, h)),
        (Some(a), None) => Some(d(a, i, h)),
        (None, None) => None,
    }
}

/// Domain form of the J-integral,
/// `J = sum (sigma_ij du_j/dx_1 - W delta_1i) dq/dx_i dA`, in the crack frame.
///
/// Displacement and `q1` gradients are central differences on the grid;
/// strains come from `strain`. Every point with a nonzero `q1` gradient must
/// be valid in both fields.
pub fn j_integral(
    disp: &DisplacementField,
    strain: &StrainField,
    stress: &StressInput,
    domain: &JIntegralDomain,
) -> Result<f64, MechError> {
    let g = &disp.grid;
    if strain.grid.len() != g.len() {
        return Err(MechError::MismatchedSeries(g.len(), strain.grid.len()));
    }
    match stress {
        StressInput::Elastic(m) => m.validate()?,
        StressInput::History { stress, strain } => {
            if stress.len() != g.len() || strain.len() != g.len() {
                return Err(MechError::MismatchedSeries(g.len(), stress.len().min(strain.len())));
            }
        }
    }
    let tip = &domain.tip;
    let (a, b) = tip.axis;
    let h = g.spacing as f64;
    let mut total = 0.0;
    let mut invalid = 0;
    for i in 0..g.len() {
        let (x, y) = g.point(i);
        let (x, y) = (x as f64, y as f64);
        let qx = (domain.q(x + h, y) - domain.q(x - h, y)) / (2.0 * h);
        let qy = (domain.q(x, y + h) - domain.q(x, y - h)) / (2.0 * h);
        if qx == 0.0 && qy == 0.0 {
            continue;
        }
        if !(disp.valid[i] && strain.valid[i]) {
            invalid += 1;
            continue;
        }
        let (Some((ux, vx)), Some((uy, vy))) = (derivative(disp, i, 0, 1), derivative(disp, i, 1, 0)) else {
            invalid += 1;
            continue;
        };
        let eps = [strain.exx[i], strain.eyy[i], strain.exy[i]];
        let (sig, w) = match stress {
            StressInput::Elastic(m) => {
                let s = m.stress(eps);
                (s, 0.5 * (s[0] * eps[0] + s[1] * eps[1] + 2.0 * s[2] * eps[2]))
            }
            StressInput::History { stress, strain } => {
                let Some(&last) = stress[i].last() else {
                    invalid += 1;
                    continue;
                };
                (last, tensor_energy(&stress[i], &strain[i]))
            }
        };
        // rotate gradients and stress into the crack frame (x1 along the axis)
        let rot = |m: [[f64; 2]; 2]| {
            let q = [[a, b], [-b, a]];
            let mut out = [[0.0; 2]; 2];
            for (r, row) in out.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    for k in 0..2 {
                        for l in 0..2 {
                            *v += q[r][k] * m[k][l] * q[c][l];
                        }
                    }
                }
            }
            out
        };
        // grad[j][i] = du_j / dx_i
        let grad = rot([[ux, uy], [vx, vy]]);
        let s = rot([[sig[0], sig[2]], [sig[2], sig[1]]]);
        let dq = tip.rotate_in(qx, qy);
        let dq = [dq.0, dq.1];
        let mut integrand = -w * dq[0];
        for (ii, dqi) in dq.iter().enumerate() {
            for (jj, gj) in grad.iter().enumerate() {
                integrand += s[ii][jj] * gj[0] * dqi;
            }
        }
        total += integrand * h * h;
    }
    if invalid > 0 {
        return Err(MechError::DomainIntersectsInvalidPoints(invalid));
    }
    Ok(total)
}

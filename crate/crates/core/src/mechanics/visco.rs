use serde::{Deserialize, Serialize};

use super::MechError;
use crate::dic2d::DisplacementField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PronyTerm {
    #[serde(rename = "E")]
    pub e: f64,
    pub rho: f64,
}

/// Prony-series relaxation modulus with a constant time-temperature shift
/// factor `a_t` and reference modulus `e_ref` for pseudo quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscoModel {
    #[serde(rename = "E_e")]
    pub e_e: f64,
    #[serde(default)]
    pub terms: Vec<PronyTerm>,
    #[serde(default = "one")]
    pub a_t: f64,
    #[serde(rename = "E_R")]
    pub e_ref: f64,
}

fn one() -> f64 {
    1.0
}

impl ViscoModel {
    pub fn elastic(e: f64) -> Self {
        Self {
            e_e: e,
            terms: Vec::new(),
            a_t: 1.0,
            e_ref: e,
        }
    }

    pub fn validate(&self) -> Result<(), MechError> {
        let bad = |what: &str| Err(MechError::Invalid(what.into()));
        if !(self.e_e >= 0.0) {
            return bad("E_e must be >= 0");
        }
        if self.terms.iter().any(|t| !(t.e > 0.0 && t.rho > 0.0)) {
            return bad("Prony terms need E_n > 0 and rho_n > 0");
        }
        if !(self.a_t > 0.0) {
            return bad("shift factor must be > 0");
        }
        if !(self.e_ref > 0.0) {
            return bad("reference modulus must be > 0");
        }
        Ok(())
    }

    /// Instantaneous modulus `E(0)`.
    pub fn e0(&self) -> f64 {
        self.e_e + self.terms.iter().map(|t| t.e).sum::<f64>()
    }
}

pub fn relax_modulus(m: &ViscoModel, t: f64) -> f64 {
    m.e_e + m.terms.iter().map(|p| p.e * (-t / p.rho).exp()).sum::<f64>()
}

fn check_times(times: &[f64], n: usize) -> Result<(), MechError> {
    if times.len() != n {
        return Err(MechError::MismatchedSeries(n, times.len()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MechError::NonMonotonicTime);
    }
    Ok(())
}

/// Hereditary integral of a piecewise-linear input, in reduced time
/// `t / a_t`. The value at the first sample acts as a step applied there;
/// each later interval contributes its increment times the trapezoid mean
/// of the kernel at its two ends.
fn convolve(input: &[f64], m: &ViscoModel, times: &[f64]) -> Result<Vec<f64>, MechError> {
    m.validate()?;
    check_times(times, input.len())?;
    let xi: Vec<f64> = times.iter().map(|t| t / m.a_t).collect();
    let e = |dt: f64| relax_modulus(m, dt);
    Ok((0..input.len())
        .map(|k| {
            let mut acc = e(xi[k] - xi[0]) * input[0];
            for i in 1..=k {
                let d = input[i] - input[i - 1];
                acc += d * 0.5 * (e(xi[k] - xi[i - 1]) + e(xi[k] - xi[i]));
            }
            acc
        })
        .collect())
}

/// Stress history of a strain history.
pub fn visco_stress(strain: &[f64], m: &ViscoModel, times: &[f64]) -> Result<Vec<f64>, MechError> {
    convolve(strain, m, times)
}

/// Pseudo (reference-elastic) displacement history of a displacement history.
pub fn pseudo_displacement(u: &[f64], m: &ViscoModel, times: &[f64]) -> Result<Vec<f64>, MechError> {
    Ok(convolve(u, m, times)?.into_iter().map(|v| v / m.e_ref).collect())
}

/// Pseudo displacement fields of a sequence of fields on one grid. A point
/// is valid only where it is valid in every frame up to that one.
pub fn pseudo_displacement_field(
    frames: &[DisplacementField],
    m: &ViscoModel,
    times: &[f64],
) -> Result<Vec<DisplacementField>, MechError> {
    check_times(times, frames.len())?;
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let n = first.grid.len();
    if frames.iter().any(|f| f.grid.len() != n) {
        return Err(MechError::Invalid("frames use different grids".into()));
    }
    let mut out: Vec<DisplacementField> = frames.to_vec();
    let mut ok = vec![true; n];
    for i in 0..n {
        let u: Vec<f64> = frames.iter().map(|f| f.u[i]).collect();
        let v: Vec<f64> = frames.iter().map(|f| f.v[i]).collect();
        let (ur, vr) = (pseudo_displacement(&u, m, times)?, pseudo_displacement(&v, m, times)?);
        for (k, f) in out.iter_mut().enumerate() {
            ok[i] &= frames[k].valid[i];
            f.valid[i] = ok[i];
            f.u[i] = if ok[i] { ur[k] } else { f64::NAN };
            f.v[i] = if ok[i] { vr[k] } else { f64::NAN };
        }
    }
    Ok(out)
}

/// Area under a stress-strain path by the trapezoid rule.
pub fn strain_energy_density(stress: &[f64], strain: &[f64]) -> Result<f64, MechError> {
    if stress.len() != strain.len() {
        return Err(MechError::MismatchedSeries(stress.len(), strain.len()));
    }
    Ok(stress
        .windows(2)
        .zip(strain.windows(2))
        .map(|(s, e)| 0.5 * (s[0] + s[1]) * (e[1] - e[0]))
        .sum())
}

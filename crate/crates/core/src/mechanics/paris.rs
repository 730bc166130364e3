use serde::{Deserialize, Serialize};

use super::MechError;
use crate::linalg::r_squared;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParisFit {
    #[serde(rename = "A")]
    pub a: f64,
    pub n: f64,
    pub r2: f64,
    /// Number of growth-rate samples used.
    pub samples: usize,
}

/// Fits `da/dN = A dK^n`. Rates come from central differences at interior
/// samples and pair with the `dK` given there; non-positive rates are
/// dropped.
pub fn paris_fit(crack_length: &[f64], cycles: &[f64], dk: &[f64]) -> Result<ParisFit, MechError> {
    let n = crack_length.len();
    if cycles.len() != n {
        return Err(MechError::MismatchedSeries(n, cycles.len()));
    }
    if dk.len() != n {
        return Err(MechError::MismatchedSeries(n, dk.len()));
    }
    if cycles.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MechError::NonMonotonicTime);
    }
    if dk.iter().any(|k| !(*k > 0.0)) {
        return Err(MechError::NonPositiveDeltaK);
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for i in 1..n.saturating_sub(1) {
        let rate = (crack_length[i + 1] - crack_length[i - 1]) / (cycles[i + 1] - cycles[i - 1]);
        if rate > 0.0 {
            x.push(dk[i].ln());
            y.push(rate.ln());
        }
    }
    if x.len() < 3 {
        return Err(MechError::NonPositiveRate);
    }
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    // all dK equal: the exponent is unidentifiable, report a flat law
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let fitted: Vec<f64> = x.iter().map(|v| intercept + slope * v).collect();
    Ok(ParisFit {
        a: intercept.exp(),
        n: slope,
        r2: r_squared(&y, &fitted),
        samples: x.len(),
    })
}

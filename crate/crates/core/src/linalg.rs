//! Small dense least-squares helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Solves `min |A x - b|` through SVD; `None` if `A` is numerically rank
/// deficient (condition number above `max_cond`).
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, max_cond: f64) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > 0.0) || max / min > max_cond {
        return None;
    }
    svd.solve(b, 0.0).ok()
}

/// Coefficient of determination of a fit.
pub(crate) fn r_squared(y: &[f64], fitted: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_fits_a_plane_and_flags_rank_loss() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (2.0, 3.0)];
        let a = DMatrix::from_fn(4, 3, |i, j| match j {
            0 => 1.0,
            1 => pts[i].0,
            _ => pts[i].1,
        });
        let b = DVector::from_fn(4, |i, _| 1.0 + 2.0 * pts[i].0 - 0.5 * pts[i].1);
        let x = lstsq(&a, &b, 1e12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12 && (x[2] + 0.5).abs() < 1e-12);

        let collinear = DMatrix::from_fn(3, 3, |i, j| match j {
            0 => 1.0,
            _ => i as f64,
        });
        assert!(lstsq(&collinear, &DVector::zeros(3), 1e12).is_none());
    }
}

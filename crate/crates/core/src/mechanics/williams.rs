//! Leading-order mode-I crack-tip fields.
//!
//! Coordinates are in the crack frame: `x` along the crack extension
//! direction, crack faces on the negative `x` axis, origin at the tip.

use std::f64::consts::PI;

/// Angular shape factors of the mode-I displacement field, i.e.
/// `u = K / (2 mu) * sqrt(r / 2 pi) * (fx, fy)`.
#[inline]
pub fn mode_i_basis(r: f64, theta: f64, kappa: f64) -> (f64, f64) {
    let scale = (r / (2.0 * PI)).sqrt();
    let (s, c) = (0.5 * theta).sin_cos();
    (
        scale * c * (kappa - 1.0 + 2.0 * s * s),
        scale * s * (kappa + 1.0 - 2.0 * c * c),
    )
}

/// Mode-I displacement plus rigid translation `(ux0, uy0)` and rotation
/// `theta0` at crack-frame point `(x, y)`.
#[allow(clippy::too_many_arguments)]
pub fn mode_i_displacement(
    k_i: f64,
    mu: f64,
    kappa: f64,
    x: f64,
    y: f64,
    ux0: f64,
    uy0: f64,
    theta0: f64,
) -> (f64, f64) {
    let r = x.hypot(y);
    let theta = y.atan2(x);
    let (fx, fy) = mode_i_basis(r, theta, kappa);
    let amp = k_i / (2.0 * mu);
    (amp * fx + ux0 - theta0 * y, amp * fy + uy0 + theta0 * x)
}

/// Mode-I stress components `(sxx, syy, sxy)` at crack-frame point `(x, y)`.
pub fn mode_i_stress(k_i: f64, x: f64, y: f64) -> (f64, f64, f64) {
    let r = x.hypot(y);
    let theta = y.atan2(x);
    let amp = k_i / (2.0 * PI * r).sqrt();
    let (s, c) = (0.5 * theta).sin_cos();
    let (s3, c3) = (1.5 * theta).sin_cos();
    (
        amp * c * (1.0 - s * s3),
        amp * c * (1.0 + s * s3),
        amp * c * s * c3,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faces_open_symmetrically() {
        let (k, mu, kappa) = (1.0, 1.0, 1.6);
        let up = mode_i_displacement(k, mu, kappa, -4.0, 1e-12, 0.0, 0.0, 0.0);
        let down = mode_i_displacement(k, mu, kappa, -4.0, -1e-12, 0.0, 0.0, 0.0);
        assert!(up.1 > 0.0 && down.1 < 0.0);
        assert!((up.1 + down.1).abs() < 1e-9);
        // ahead of the tip the normal displacement vanishes on the crack line
        let ahead = mode_i_displacement(k, mu, kappa, 4.0, 0.0, 0.0, 0.0, 0.0);
        assert!(ahead.1.abs() < 1e-15);
        // opening behind the tip: (kappa + 1) K / (2 mu) sqrt(r / 2 pi) per face
        let expect = (kappa + 1.0) * k / (2.0 * mu) * (4.0 / (2.0 * PI)).sqrt();
        assert!((up.1 - expect).abs() < 1e-9);
    }

    #[test]
    fn stress_ahead_of_tip_is_equibiaxial() {
        let (sxx, syy, sxy) = mode_i_stress(2.0, 3.0, 0.0);
        let expect = 2.0 / (2.0 * PI * 3.0).sqrt();
        assert!((sxx - expect).abs() < 1e-14);
        assert!((syy - expect).abs() < 1e-14);
        assert!(sxy.abs() < 1e-14);
    }
}

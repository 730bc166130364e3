use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GrayImage, ImageError, Interpolator, ValidityMask};
use crate::mechanics::williams;

const MAX_ROTATION_DEG: f64 = 10.0;
const MAX_AFFINE_GRADIENT: f64 = 0.1;

/// Analytic displacement field `x' = x + d(x)` used to synthesize deformed
/// images with known ground truth. All quantities are in pixels/radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticWarp {
    Translation {
        u: f64,
        v: f64,
    },
    /// Counter-clockwise rotation (in image axes, y down) about `(cx, cy)`.
    Rotation {
        theta: f64,
        cx: f64,
        cy: f64,
    },
    /// First-order field about `(cx, cy)`.
    Affine {
        u: f64,
        v: f64,
        ux: f64,
        uy: f64,
        vx: f64,
        vy: f64,
        cx: f64,
        cy: f64,
    },
    /// Second-order field about `(cx, cy)`, same parameterization as the
    /// second-order subset shape function.
    Polynomial {
        params: [f64; 12],
        cx: f64,
        cy: f64,
    },
    /// Mode-I crack-tip displacement field plus rigid motion. The crack faces
    /// lie along `angle + pi` from the tip.
    ModeI {
        k_i: f64,
        mu: f64,
        kappa: f64,
        tip_x: f64,
        tip_y: f64,
        angle: f64,
        ux0: f64,
        uy0: f64,
        theta0: f64,
    },
}

impl AnalyticWarp {
    pub fn identity() -> Self {
        AnalyticWarp::Translation { u: 0.0, v: 0.0 }
    }

    /// Displacement `d(x, y)` so that the forward map is `(x, y) + d`.
    pub fn displacement(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            AnalyticWarp::Translation { u, v } => (u, v),
            AnalyticWarp::Rotation { theta, cx, cy } => {
                let (s, c) = theta.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                (c * dx - s * dy - dx, s * dx + c * dy - dy)
            }
            AnalyticWarp::Affine {
                u,
                v,
                ux,
                uy,
                vx,
                vy,
                cx,
                cy,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                (u + ux * dx + uy * dy, v + vx * dx + vy * dy)
            }
            AnalyticWarp::Polynomial { params: p, cx, cy } => {
                let (dx, dy) = (x - cx, y - cy);
                (
                    p[0] + p[1] * dx
                        + p[2] * dy
                        + 0.5 * p[6] * dx * dx
                        + 0.5 * p[7] * dy * dy
                        + p[8] * dx * dy,
                    p[3] + p[4] * dx
                        + p[5] * dy
                        + 0.5 * p[9] * dx * dx
                        + 0.5 * p[10] * dy * dy
                        + p[11] * dx * dy,
                )
            }
            AnalyticWarp::ModeI {
                k_i,
                mu,
                kappa,
                tip_x,
                tip_y,
                angle,
                ux0,
                uy0,
                theta0,
            } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - tip_x, y - tip_y);
                // crack-frame coordinates
                let xc = c * dx + s * dy;
                let yc = -s * dx + c * dy;
                let (ux, uy) =
                    williams::mode_i_displacement(k_i, mu, kappa, xc, yc, ux0, uy0, theta0);
                (c * ux - s * uy, s * ux + c * uy)
            }
        }
    }

    fn check_invertible(&self) -> Result<(), ImageError> {
        let bad = |msg: String| Err(ImageError::NonInvertibleWarp(msg));
        match *self {
            AnalyticWarp::Translation { u, v } if !(u.is_finite() && v.is_finite()) => {
                bad("non-finite translation".into())
            }
            AnalyticWarp::Rotation { theta, .. }
                if !theta.is_finite() || theta.abs() > MAX_ROTATION_DEG.to_radians() =>
            {
                bad(format!(
                    "rotation {:.3} deg exceeds {MAX_ROTATION_DEG} deg",
                    theta.to_degrees()
                ))
            }
            AnalyticWarp::Affine { ux, uy, vx, vy, .. }
            | AnalyticWarp::Polynomial {
                params: [_, ux, uy, _, vx, vy, ..],
                ..
            } if [ux, uy, vx, vy]
                .iter()
                .any(|g| !g.is_finite() || g.abs() > MAX_AFFINE_GRADIENT) =>
            {
                bad(format!(
                    "displacement gradient exceeds {MAX_AFFINE_GRADIENT}"
                ))
            }
            AnalyticWarp::ModeI { mu, kappa, .. } if !(mu > 0.0 && kappa > 0.0) => {
                bad("mode-I field needs mu > 0 and kappa > 0".into())
            }
            _ => Ok(()),
        }
    }

    /// Preimage `X` with `X + d(X) = (x, y)`, or `None` if the fixed point
    /// iteration does not settle (e.g. inside an opened crack).
    pub fn inverse(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        match *self {
            AnalyticWarp::Translation { u, v } => Some((x - u, y - v)),
            AnalyticWarp::Rotation { theta, cx, cy } => {
                let (s, c) = theta.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                Some((cx + c * dx + s * dy, cy - s * dx + c * dy))
            }
            AnalyticWarp::Affine {
                u,
                v,
                ux,
                uy,
                vx,
                vy,
                cx,
                cy,
            } => {
                let (a, b, c, d) = (1.0 + ux, uy, vx, 1.0 + vy);
                let det = a * d - b * c;
                if det.abs() < 1e-12 {
                    return None;
                }
                let (rx, ry) = (x - cx - u, y - cy - v);
                Some((cx + (d * rx - b * ry) / det, cy + (-c * rx + a * ry) / det))
            }
            AnalyticWarp::Polynomial { .. } | AnalyticWarp::ModeI { .. } => {
                let (mut px, mut py) = (x, y);
                for _ in 0..100 {
                    let (dx, dy) = self.displacement(px, py);
                    let (nx, ny) = (x - dx, y - dy);
                    let step = (nx - px).abs().max((ny - py).abs());
                    px = nx;
                    py = ny;
                    if !step.is_finite() {
                        return None;
                    }
                    if step < 1e-12 {
                        let (dx, dy) = self.displacement(px, py);
                        let res = (px + dx - x).abs().max((py + dy - y).abs());
                        return (res < 1e-9).then_some((px, py));
                    }
                }
                None
            }
        }
    }
}

/// Synthesized image plus the mask of pixels whose preimage was interpolable.
#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub image: GrayImage,
    pub mask: ValidityMask,
}

/// Renders `g(x) = f(W^-1(x))` with the cubic interpolator.
///
/// Pixels whose preimage falls outside the interpolation domain are set to
/// 0.5 and flagged invalid in the returned mask.
pub fn synth_deform(img: &GrayImage, warp: &AnalyticWarp) -> Result<SynthOutput, ImageError> {
    synth_deform_with_noise(img, warp, 0.0, 0)
}

/// [`synth_deform`] followed by additive Gaussian noise of standard deviation
/// `sigma` (intensity units), clamped to `[0, 1]`.
pub fn synth_deform_with_noise(
    img: &GrayImage,
    warp: &AnalyticWarp,
    sigma: f64,
    seed: u64,
) -> Result<SynthOutput, ImageError> {
    warp.check_invertible()?;
    let itp = Interpolator::new(img);
    let (w, h) = (img.width(), img.height());
    let mut data = vec![0.5; w * h];
    let mut valid = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if let Some((px, py)) = warp.inverse(x as f64, y as f64) {
                if let Ok(v) = itp.value(px, py) {
                    data[y * w + x] = v.clamp(0.0, 1.0);
                    valid[y * w + x] = true;
                }
            }
        }
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| ImageError::NonInvertibleWarp(format!("bad noise sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in data.iter_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok(SynthOutput {
        image: GrayImage::new(w, h, data)?,
        mask: ValidityMask::from_vec(w, h, valid),
    })
}

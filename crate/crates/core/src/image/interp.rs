use super::{GrayImage, ImageError};

/// Distance from the image border inside which interpolation is defined.
pub const INTERP_MARGIN: f64 = 2.0;

/// Separable cubic-convolution interpolator.
///
/// Uses Keys' six-tap, fourth-order kernel, which is C1 and reproduces
/// polynomials up to degree three exactly. Queries are accepted on
/// `[2, w - 3] x [2, h - 3]`; anything outside is an error.
#[derive(Clone, Copy, Debug)]
pub struct Interpolator<'a> {
    img: &'a GrayImage,
}

#[inline]
fn kernel(t: f64) -> f64 {
    let s = t.abs();
    if s < 1.0 {
        ((4.0 / 3.0) * s - 7.0 / 3.0) * s * s + 1.0
    } else if s < 2.0 {
        ((-7.0 / 12.0 * s + 3.0) * s - 59.0 / 12.0) * s + 2.5
    } else if s < 3.0 {
        ((1.0 / 12.0 * s - 2.0 / 3.0) * s + 7.0 / 4.0) * s - 1.5
    } else {
        0.0
    }
}

#[inline]
fn kernel_deriv(t: f64) -> f64 {
    let s = t.abs();
    let d = if s < 1.0 {
        (4.0 * s - 14.0 / 3.0) * s
    } else if s < 2.0 {
        (-7.0 / 4.0 * s + 6.0) * s - 59.0 / 12.0
    } else if s < 3.0 {
        (0.25 * s - 4.0 / 3.0) * s + 7.0 / 4.0
    } else {
        0.0
    };
    if t < 0.0 {
        -d
    } else {
        d
    }
}

/// Base index (tap offset -2) and fractional part for one axis.
#[inline]
fn split(coord: f64, len: usize) -> (usize, f64) {
    let i0 = (coord.floor() as usize).min(len - 4);
    (i0 - 2, coord - i0 as f64)
}

#[inline]
fn weights(t: f64) -> [f64; 6] {
    // exact at the knots so that integer queries return pixel values bit-for-bit
    if t == 0.0 {
        return [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    }
    if t == 1.0 {
        return [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    }
    [
        kernel(t + 2.0),
        kernel(t + 1.0),
        kernel(t),
        kernel(t - 1.0),
        kernel(t - 2.0),
        kernel(t - 3.0),
    ]
}

#[inline]
fn deriv_weights(t: f64) -> [f64; 6] {
    [
        kernel_deriv(t + 2.0),
        kernel_deriv(t + 1.0),
        kernel_deriv(t),
        kernel_deriv(t - 1.0),
        kernel_deriv(t - 2.0),
        kernel_deriv(t - 3.0),
    ]
}

impl<'a> Interpolator<'a> {
    pub fn new(img: &'a GrayImage) -> Self {
        Self { img }
    }

    pub fn image(&self) -> &'a GrayImage {
        self.img
    }

    /// Whether `(x, y)` lies in the interpolation domain.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (w, h) = (self.img.width(), self.img.height());
        w >= 6
            && h >= 6
            && x >= INTERP_MARGIN
            && y >= INTERP_MARGIN
            && x <= (w - 3) as f64
            && y <= (h - 3) as f64
    }

    pub fn value(&self, x: f64, y: f64) -> Result<f64, ImageError> {
        if !self.contains(x, y) {
            return Err(ImageError::OutOfDomain { x, y });
        }
        let (bx, tx) = split(x, self.img.width());
        let (by, ty) = split(y, self.img.height());
        let wx = weights(tx);
        let wy = weights(ty);
        Ok(self.convolve(bx, by, &wx, &wy))
    }

    /// Interpolated value together with its analytic x/y derivatives.
    pub fn value_grad(&self, x: f64, y: f64) -> Result<(f64, f64, f64), ImageError> {
        if !self.contains(x, y) {
            return Err(ImageError::OutOfDomain { x, y });
        }
        let (bx, tx) = split(x, self.img.width());
        let (by, ty) = split(y, self.img.height());
        let wx = weights(tx);
        let wy = weights(ty);
        // d/dx of kernel(t - k) with t = x - i0 is kernel'(t - k).
        let dx = deriv_weights(tx);
        let dy = deriv_weights(ty);
        let w = self.img.width();
        let data = self.img.data();
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for (j, (&wyj, &dyj)) in wy.iter().zip(&dy).enumerate() {
            let row = &data[(by + j) * w + bx..(by + j) * w + bx + 6];
            let mut rv = 0.0;
            let mut rd = 0.0;
            for i in 0..6 {
                rv += wx[i] * row[i];
                rd += dx[i] * row[i];
            }
            v += wyj * rv;
            gx += wyj * rd;
            gy += dyj * rv;
        }
        Ok((v, gx, gy))
    }

    #[inline]
    fn convolve(&self, bx: usize, by: usize, wx: &[f64; 6], wy: &[f64; 6]) -> f64 {
        let w = self.img.width();
        let data = self.img.data();
        let mut v = 0.0;
        for (j, wyj) in wy.iter().enumerate() {
            let row = &data[(by + j) * w + bx..(by + j) * w + bx + 6];
            let mut rv = 0.0;
            for i in 0..6 {
                rv += wx[i] * row[i];
            }
            v += wyj * rv;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly_image(w: usize, h: usize, c: [f64; 16]) -> (GrayImage, impl Fn(f64, f64) -> f64) {
        // sum c[4i+j] x^i y^j, rescaled into [0, 1]
        let raw = move |x: f64, y: f64| {
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    s += c[4 * i + j] * x.powi(i as i32) * y.powi(j as i32);
                }
            }
            s
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for y in 0..h {
            for x in 0..w {
                let v = raw(x as f64, y as f64);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let span = (hi - lo).max(1e-12);
        let f = move |x: f64, y: f64| (raw(x, y) - lo) / span;
        let img = GrayImage::from_fn(w, h, |x, y| f(x as f64, y as f64).clamp(0.0, 1.0)).unwrap();
        (img, f)
    }

    #[test]
    fn kernel_is_interpolating_and_partition_of_unity() {
        assert_eq!(kernel(0.0), 1.0);
        for k in 1..4 {
            assert!(kernel(k as f64).abs() < 1e-15);
        }
        for t in [0.0, 0.1, 0.37, 0.5, 0.93] {
            let s: f64 = weights(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn knots_return_pixel_values() {
        let img = GrayImage::from_fn(12, 10, |x, y| ((x * 7 + y * 13) % 17) as f64 / 17.0).unwrap();
        let itp = Interpolator::new(&img);
        for y in 2..=7 {
            for x in 2..=9 {
                let v = itp.value(x as f64, y as f64).unwrap();
                assert!((v - img.get(x, y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn linear_ramp_is_preserved() {
        let img = GrayImage::from_fn(10, 8, |x, _| x as f64 / 10.0).unwrap();
        let itp = Interpolator::new(&img);
        assert!((itp.value(2.5, 3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((itp.value(6.75, 4.2).unwrap() - 0.675).abs() < 1e-14);
    }

    #[test]
    fn cube_is_reproduced() {
        // f(x) = x^3 / 9^3 on a 10-wide image, query at 2.25
        let img = GrayImage::from_fn(10, 8, |x, _| (x as f64).powi(3) / 729.0).unwrap();
        let itp = Interpolator::new(&img);
        let v = itp.value(2.25, 3.5).unwrap() * 729.0;
        assert!((v - 2.25f64.powi(3)).abs() < 1e-9);
    }

    #[test]
    fn domain_is_enforced() {
        let img = GrayImage::filled(10, 10, 0.5).unwrap();
        let itp = Interpolator::new(&img);
        assert!(itp.value(2.0, 2.0).is_ok());
        assert!(itp.value(7.0, 7.0).is_ok());
        assert!(matches!(
            itp.value(1.99, 5.0),
            Err(ImageError::OutOfDomain { .. })
        ));
        assert!(itp.value(5.0, 7.01).is_err());
        assert!(itp.value(f64::NAN, 5.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let img = GrayImage::from_fn(16, 16, |x, y| {
            0.5 + 0.3 * (0.7 * x as f64).sin() * (0.4 * y as f64).cos()
        })
        .unwrap();
        let itp = Interpolator::new(&img);
        let h = 1e-6;
        for (x, y) in [(5.3, 6.7), (8.01, 4.5), (10.9, 10.2)] {
            let (_, gx, gy) = itp.value_grad(x, y).unwrap();
            let nx = (itp.value(x + h, y).unwrap() - itp.value(x - h, y).unwrap()) / (2.0 * h);
            let ny = (itp.value(x, y + h).unwrap() - itp.value(x, y - h).unwrap()) / (2.0 * h);
            assert!((gx - nx).abs() < 1e-7, "{gx} vs {nx}");
            assert!((gy - ny).abs() < 1e-7, "{gy} vs {ny}");
        }
    }

    proptest! {
        #[test]
        fn exact_on_bicubic_polynomials(
            c in proptest::array::uniform16(-1.0f64..1.0),
            qx in 2.0f64..17.0,
            qy in 2.0f64..13.0,
        ) {
            let (img, f) = poly_image(20, 16, c);
            let itp = Interpolator::new(&img);
            let v = itp.value(qx, qy).unwrap();
            prop_assert!((v - f(qx, qy)).abs() <= 1e-9);
        }
    }
}

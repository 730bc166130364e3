//! Synthetic stereo scenes: a speckled plane seen through calibrated cameras.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::{Extrinsics, Intrinsics};
use super::StereoError;
use crate::image::GrayImage;

/// Gaussian-dot speckle painted on a plane, in material coordinates.
#[derive(Clone, Debug)]
pub struct SpeckleTexture {
    dots: Vec<(f64, f64)>,
    sigma: f64,
    cell: f64,
    origin: (f64, f64),
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
    base: f64,
    contrast: f64,
}

impl SpeckleTexture {
    /// Dots of standard deviation `sigma` scattered uniformly over
    /// `[s0, s1] x [t0, t1]`, about one dot per `(2.5 sigma)^2` of area.
    pub fn new(seed: u64, s0: f64, s1: f64, t0: f64, t1: f64, sigma: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let area = (s1 - s0) * (t1 - t0);
        let n = (area / (2.5 * sigma).powi(2)).ceil() as usize;
        let dots: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(s0..s1), rng.random_range(t0..t1)))
            .collect();
        let cell = 4.0 * sigma;
        let cols = ((s1 - s0) / cell).ceil() as usize + 1;
        let rows = ((t1 - t0) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (k, &(s, t)) in dots.iter().enumerate() {
            let c = ((s - s0) / cell) as usize;
            let r = ((t - t0) / cell) as usize;
            buckets[r.min(rows - 1) * cols + c.min(cols - 1)].push(k as u32);
        }
        Self {
            dots,
            sigma,
            cell,
            origin: (s0, t0),
            cols,
            rows,
            buckets,
            base: 0.9,
            contrast: 0.7,
        }
    }

    /// Intensity at material point `(s, t)`.
    pub fn value(&self, s: f64, t: f64) -> f64 {
        let c = ((s - self.origin.0) / self.cell).floor() as i64;
        let r = ((t - self.origin.1) / self.cell).floor() as i64;
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let mut clear = 1.0;
        for rr in r - 1..=r + 1 {
            for cc in c - 1..=c + 1 {
                if rr < 0 || cc < 0 || rr >= self.rows as i64 || cc >= self.cols as i64 {
                    continue;
                }
                for &k in &self.buckets[rr as usize * self.cols + cc as usize] {
                    let (ds, dt) = (s - self.dots[k as usize].0, t - self.dots[k as usize].1);
                    clear *= 1.0 - (-(ds * ds + dt * dt) * inv).exp();
                }
            }
        }
        self.base - self.contrast * (1.0 - clear)
    }
}

/// Plane through `origin` spanned by orthonormal `axis_s`, `axis_t`. The
/// material point `(S, T)` sits at `origin + scale_s S axis_s + scale_t T axis_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub origin: Vector3<f64>,
    pub axis_s: Vector3<f64>,
    pub axis_t: Vector3<f64>,
    pub scale_s: f64,
    pub scale_t: f64,
}

impl Plane {
    /// Fronto-parallel plane at depth `z` in the left-camera frame.
    pub fn fronto(z: f64) -> Self {
        Self {
            origin: Vector3::new(0.0, 0.0, z),
            axis_s: Vector3::x(),
            axis_t: Vector3::y(),
            scale_s: 1.0,
            scale_t: 1.0,
        }
    }

    pub fn translated(mut self, d: Vector3<f64>) -> Self {
        self.origin += d;
        self
    }

    /// World position of material point `(s, t)`.
    pub fn point(&self, s: f64, t: f64) -> Vector3<f64> {
        self.origin + self.axis_s * (self.scale_s * s) + self.axis_t * (self.scale_t * t)
    }
}

/// Renders `plane` as seen by a camera at pose `extr`. Pixels whose ray
/// misses the plane show the texture basecoat.
pub fn render_view(
    intr: &Intrinsics,
    extr: &Extrinsics,
    plane: &Plane,
    texture: &SpeckleTexture,
    width: usize,
    height: usize,
) -> Result<GrayImage, StereoError> {
    intr.validate()?;
    let rt = extr.r.transpose();
    let center = -(rt * extr.t);
    let normal = plane.axis_s.cross(&plane.axis_t);
    let mut data = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            let (iu, iv) = intr.undistort(u as f64, v as f64)?;
            let (x, y) = intr.pixel_to_normalized(iu, iv);
            let dir = rt * Vector3::new(x, y, 1.0);
            let denom = normal.dot(&dir);
            let lambda = normal.dot(&(plane.origin - center)) / denom;
            let value = if denom.abs() > 1e-12 && lambda > 0.0 {
                let rel = center + dir * lambda - plane.origin;
                texture.value(
                    plane.axis_s.dot(&rel) / plane.scale_s,
                    plane.axis_t.dot(&rel) / plane.scale_t,
                )
            } else {
                texture.base
            };
            data.push(value);
        }
    }
    GrayImage::new(width, height, data).map_err(|e| StereoError::InvalidCamera(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_is_bounded_and_textured() {
        let tex = SpeckleTexture::new(1, -50.0, 50.0, -50.0, 50.0, 0.6);
        let vals: Vec<f64> = (0..400).map(|i| tex.value(-40.0 + 0.2 * i as f64, 3.0)).collect();
        assert!(vals.iter().all(|v| (0.2..=0.9).contains(v)));
        let spread = vals.iter().cloned().fold(0.0, f64::max) - vals.iter().cloned().fold(1.0, f64::min);
        assert!(spread > 0.4);
    }

    #[test]
    fn fronto_plane_maps_material_to_pixels() {
        let tex = SpeckleTexture::new(2, -60.0, 60.0, -60.0, 60.0, 0.5);
        let k = Intrinsics::pinhole(1000.0, 50.0, 40.0);
        let img = render_view(&k, &Extrinsics::identity(), &Plane::fronto(500.0), &tex, 100, 80).unwrap();
        // pixel (u, v) sees material point ((u - 50) / 2, (v - 40) / 2)
        assert!((img.get(70, 25) - tex.value(10.0, -7.5)).abs() < 1e-12);
    }
}

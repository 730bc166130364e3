use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SpeckleError;
use crate::image::GrayImage;

/// Basecoat intensity of generated patterns.
pub const BASECOAT: f64 = 0.9;

/// Sub-samples per pixel edge used to anti-alias granule boundaries.
const SUPERSAMPLE: usize = 4;
/// Granule radii are jittered uniformly by this fraction.
const RADIUS_JITTER: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeckleParams {
    /// Fraction of the area covered by dark granules, in `[0, 0.9]`.
    pub density: f64,
    /// Nominal granule radius in pixels (>= 1).
    pub granule_radius: f64,
    /// Basecoat minus granule intensity, in `[0, 1]`.
    pub contrast: f64,
    pub rng_seed: u64,
    /// Standard deviation (px) of the Gaussian that softens granule edges.
    /// Hard box-sampled edges carry energy up to the Nyquist limit, which
    /// biases every subpixel interpolator.
    #[serde(default = "default_edge_sigma")]
    pub edge_sigma: f64,
}

fn default_edge_sigma() -> f64 {
    0.7
}

impl Default for SpeckleParams {
    fn default() -> Self {
        Self {
            density: 0.5,
            granule_radius: 2.0,
            contrast: 0.7,
            rng_seed: 0,
            edge_sigma: default_edge_sigma(),
        }
    }
}

impl SpeckleParams {
    fn validate(&self) -> Result<(), SpeckleError> {
        if !(0.0..=0.9).contains(&self.density) {
            return Err(SpeckleError::InvalidParams(format!(
                "density {} outside [0, 0.9]",
                self.density
            )));
        }
        if !(self.granule_radius >= 1.0) || !self.granule_radius.is_finite() {
            return Err(SpeckleError::InvalidParams(format!(
                "granule radius {} below 1 px",
                self.granule_radius
            )));
        }
        if !(0.0..=BASECOAT).contains(&self.contrast) {
            return Err(SpeckleError::InvalidParams(format!(
                "contrast {} outside [0, {BASECOAT}]",
                self.contrast
            )));
        }
        if !(0.0..=5.0).contains(&self.edge_sigma) {
            return Err(SpeckleError::InvalidParams(format!(
                "edge sigma {} outside [0, 5] px",
                self.edge_sigma
            )));
        }
        Ok(())
    }
}

/// Separable Gaussian smoothing with edge replication.
fn smooth(data: &mut [f64], width: usize, height: usize, sigma: f64) {
    if sigma == 0.0 {
        return;
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    let (w, h) = (width as i64, height as i64);
    let mut tmp = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[(y * w + x) as usize] = (-r..=r)
                .map(|i| k[(i + r) as usize] * data[(y * w + (x + i).clamp(0, w - 1)) as usize])
                .sum();
        }
    }
    for y in 0..h {
        for x in 0..w {
            data[(y * w + x) as usize] = (-r..=r)
                .map(|i| k[(i + r) as usize] * tmp[((y + i).clamp(0, h - 1) * w + x) as usize])
                .sum();
        }
    }
}

/// Renders a white basecoat with dark circular granules dropped at seeded
/// uniform positions until the covered fraction reaches `density`.
///
/// Pixel values are anti-aliased by 4x4 supersampling of the disc union and
/// then smoothed with a Gaussian of `edge_sigma` px.
pub fn gen_speckle(
    params: &SpeckleParams,
    width: usize,
    height: usize,
) -> Result<GrayImage, SpeckleError> {
    params.validate()?;
    if width < 32 || height < 32 {
        return Err(SpeckleError::InvalidParams(format!(
            "pattern must be at least 32x32, got {width}x{height}"
        )));
    }
    let (sw, sh) = (width * SUPERSAMPLE, height * SUPERSAMPLE);
    let mut covered = vec![false; sw * sh];
    let total = sw * sh;
    let target = (params.density * total as f64).ceil() as usize;
    let mut count = 0usize;

    let r_min = params.granule_radius * (1.0 - RADIUS_JITTER);
    let expected = (width * height) as f64 / (std::f64::consts::PI * r_min * r_min);
    let max_attempts = (50.0 * expected) as usize + 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut attempts = 0;
    let ss = SUPERSAMPLE as f64;

    while count < target {
        if attempts >= max_attempts {
            return Err(SpeckleError::DensityUnreachable {
                target: params.density,
                reached: count as f64 / total as f64,
                attempts,
            });
        }
        attempts += 1;
        let r = params.granule_radius * (1.0 + RADIUS_JITTER * (2.0 * rng.random::<f64>() - 1.0));
        // pixel coordinates; pixel (x, y) spans [x - 0.5, x + 0.5]
        let cx = -0.5 - r + rng.random::<f64>() * (width as f64 + 2.0 * r);
        let cy = -0.5 - r + rng.random::<f64>() * (height as f64 + 2.0 * r);
        // sub-sample (i, j) sits at ((i + 0.5) / ss - 0.5, ...)
        let to_sub = |c: f64| (c + 0.5) * ss - 0.5;
        let (scx, scy, sr) = (to_sub(cx), to_sub(cy), r * ss);
        let i0 = (scx - sr).ceil().max(0.0) as usize;
        let j0 = (scy - sr).ceil().max(0.0) as usize;
        let i1 = ((scx + sr).floor() as i64).min(sw as i64 - 1);
        let j1 = ((scy + sr).floor() as i64).min(sh as i64 - 1);
        if i1 < 0 || j1 < 0 {
            continue;
        }
        for j in j0..=j1 as usize {
            let dy = j as f64 - scy;
            for i in i0..=i1 as usize {
                let dx = i as f64 - scx;
                if dx * dx + dy * dy <= sr * sr {
                    let cell = &mut covered[j * sw + i];
                    if !*cell {
                        *cell = true;
                        count += 1;
                    }
                }
            }
        }
    }

    let per_pixel = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    let mut coverage: Vec<f64> = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| {
            let mut n = 0usize;
            for j in 0..SUPERSAMPLE {
                let row = (y * SUPERSAMPLE + j) * sw + x * SUPERSAMPLE;
                n += covered[row..row + SUPERSAMPLE].iter().filter(|c| **c).count();
            }
            n as f64 / per_pixel
        })
        .collect();
    smooth(&mut coverage, width, height, params.edge_sigma);
    let data = coverage
        .iter()
        .map(|c| (BASECOAT - params.contrast * c.clamp(0.0, 1.0)).clamp(0.0, 1.0))
        .collect();
    Ok(GrayImage::new(width, height, data)?)
}

/// Mean granule diameter estimated as the full width at half maximum of the
/// image autocorrelation, averaged over the x and y axes.
///
/// Overlapping granules merge into clusters, so connected-component sizes
/// grow with density; the autocorrelation width stays tied to the size of a
/// single granule.
pub fn mean_granule_diameter(img: &GrayImage) -> Option<f64> {
    let (w, h) = (img.width(), img.height());
    let mean = img.mean();
    let f: Vec<f64> = img.data().iter().map(|v| v - mean).collect();
    let energy: f64 = f.iter().map(|v| v * v).sum();
    if energy < 1e-18 {
        return None;
    }
    let max_lag = (w.min(h) / 4).max(2);
    let autocorr = |dx: usize, dy: usize| {
        let mut s = 0.0;
        for y in 0..h - dy {
            for x in 0..w - dx {
                s += f[y * w + x] * f[(y + dy) * w + x + dx];
            }
        }
        // normalize by the overlap so that lags are unbiased
        s / ((w - dx) * (h - dy)) as f64 * (w * h) as f64 / energy
    };
    let half_width = |axis_x: bool| -> Option<f64> {
        let mut prev = 1.0;
        for lag in 1..=max_lag {
            let rho = if axis_x {
                autocorr(lag, 0)
            } else {
                autocorr(0, lag)
            };
            if rho <= 0.5 {
                return Some(lag as f64 - 1.0 + (prev - 0.5) / (prev - rho));
            }
            prev = rho;
        }
        None
    };
    Some(half_width(true)? + half_width(false)?)
}

//! Digital volume correlation: subvolume matching in voxel volumes and
//! strain from local displacement fits.

#[cfg(feature = "io")]
mod io;
mod matching;
mod strain;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "io")]
pub use io::{load_volume, save_volume_raw, volume_files, VolumeHeader};
pub use matching::{dvc_match, dvc_match_point, DvcOptions, VolCriterion, VolDisplacement, VolGrid};
pub use strain::{vol_strain, VolStrain, VolStrainMeasure};
pub use synth::BlobVolume;

#[derive(Debug, Error)]
pub enum DvcError {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("({0}, {1}, {2}) is outside the interpolation domain")]
    OutOfDomain(f64, f64, f64),
    #[error("subvolume or search window at ({0}, {1}, {2}) leaves the volume")]
    SubvolumeOutOfBounds(usize, usize, usize),
    #[error("subvolume has no intensity variation")]
    ZeroVarianceSubvolume,
    #[error("refinement diverged")]
    Diverged,
    #[error("too few valid neighbours for a strain fit")]
    InsufficientSupport,
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Scalar voxel volume, x fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    nx: usize,
    ny: usize,
    nz: usize,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(nx: usize, ny: usize, nz: usize, data: Vec<f64>) -> Result<Self, DvcError> {
        if nx < 5 || ny < 5 || nz < 5 {
            return Err(DvcError::InvalidVolume(format!("dimensions {nx}x{ny}x{nz}, need >= 5")));
        }
        if data.len() != nx * ny * nz {
            return Err(DvcError::InvalidVolume(format!(
                "{} samples for {nx}x{ny}x{nz}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DvcError::InvalidVolume("non-finite intensity".into()));
        }
        Ok(Self { nx, ny, nz, data })
    }

    pub fn from_fn(
        nx: usize,
        ny: usize,
        nz: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self, DvcError> {
        let mut data = Vec::with_capacity(nx * ny * nz);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(nx, ny, nz, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[x + self.nx * (y + self.ny * z)]
    }

    /// `a * v + b` per voxel.
    pub fn affine_intensity(&self, a: f64, b: f64) -> Result<Self, DvcError> {
        Self::new(self.nx, self.ny, self.nz, self.data.iter().map(|v| a * v + b).collect())
    }
}

/// Trilinear interpolation on `[0, n-1]` along each axis.
pub fn trilinear(vol: &Volume, x: f64, y: f64, z: f64) -> Result<f64, DvcError> {
    let cell = |p: f64, n: usize| -> Option<(usize, f64)> {
        if !(p >= 0.0 && p <= (n - 1) as f64) {
            return None;
        }
        let i = (p.floor() as usize).min(n - 2);
        Some((i, p - i as f64))
    };
    let (Some((i, fx)), Some((j, fy)), Some((k, fz))) = (cell(x, vol.nx), cell(y, vol.ny), cell(z, vol.nz)) else {
        return Err(DvcError::OutOfDomain(x, y, z));
    };
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + t * (b - a) };
    let plane = |kk: usize| {
        let row = |jj: usize| lerp(vol.get(i, jj, kk), vol.get(i + 1, jj, kk), fx);
        lerp(row(j), row(j + 1), fy)
    };
    Ok(lerp(plane(k), plane(k + 1), fz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_volumes() {
        assert!(Volume::new(4, 5, 5, vec![0.0; 100]).is_err());
        assert!(Volume::new(5, 5, 5, vec![0.0; 124]).is_err());
        let mut d = vec![0.0; 125];
        d[3] = f64::NAN;
        assert!(Volume::new(5, 5, 5, d).is_err());
    }

    #[test]
    fn knots_and_linear_fields() {
        let v = Volume::from_fn(6, 7, 8, |x, y, z| (x * 100 + y * 10 + z) as f64 * 0.013).unwrap();
        for (x, y, z) in [(0, 0, 0), (5, 6, 7), (3, 2, 4)] {
            assert_eq!(trilinear(&v, x as f64, y as f64, z as f64).unwrap(), v.get(x, y, z));
        }
        let ramp = Volume::from_fn(6, 6, 6, |x, _, _| x as f64).unwrap();
        assert_eq!(trilinear(&ramp, 2.5, 1.0, 3.0).unwrap(), 2.5);
        assert!(trilinear(&ramp, 5.0001, 1.0, 1.0).is_err());
        assert!(trilinear(&ramp, -1e-9, 1.0, 1.0).is_err());
    }

    #[test]
    fn exact_on_trilinear_products() {
        let v = Volume::from_fn(9, 9, 9, |x, y, z| (x * y * z) as f64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let (x, y, z) = (rng.random_range(0.0..8.0), rng.random_range(0.0..8.0), rng.random_range(0.0..8.0));
            assert!((trilinear(&v, x, y, z).unwrap() - x * y * z).abs() < 1e-9);
        }
    }
}

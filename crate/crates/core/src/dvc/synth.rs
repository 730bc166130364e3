use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DvcError, Volume};

/// Analytic texture of random Gaussian blobs, for synthetic volumes whose
/// deformed state can be evaluated exactly instead of interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobVolume {
    pub centers: Vec<[f64; 3]>,
    pub amplitudes: Vec<f64>,
    pub sigma: f64,
}

impl BlobVolume {
    /// About one blob per `(3 sigma)^3` over a box padded by `4 sigma`.
    pub fn random(seed: u64, dims: (usize, usize, usize), sigma: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pad = 4.0 * sigma;
        let ext = [dims.0, dims.1, dims.2].map(|n| n as f64 + 2.0 * pad);
        let count = (ext[0] * ext[1] * ext[2] / (3.0 * sigma).powi(3)).ceil() as usize;
        let centers = (0..count)
            .map(|_| ext.map(|e| rng.random_range(0.0..e) - pad))
            .collect();
        let amplitudes = (0..count).map(|_| rng.random_range(0.5..1.0)).collect();
        Self {
            centers,
            amplitudes,
            sigma,
        }
    }

    pub fn value(&self, p: [f64; 3]) -> f64 {
        let s2 = 2.0 * self.sigma * self.sigma;
        let cut = (4.0 * self.sigma).powi(2);
        let mut v = 0.0;
        for (c, a) in self.centers.iter().zip(&self.amplitudes) {
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
            if d2 < cut {
                v += a * (-d2 / s2).exp();
            }
        }
        0.1 + 0.8 * (1.0 - (-v).exp())
    }

    /// Samples the texture at `inverse(voxel)`, so `inverse` maps deformed
    /// positions back to reference positions.
    pub fn render(
        &self,
        dims: (usize, usize, usize),
        inverse: impl Fn([f64; 3]) -> [f64; 3],
    ) -> Result<Volume, DvcError> {
        Volume::from_fn(dims.0, dims.1, dims.2, |x, y, z| {
            self.value(inverse([x as f64, y as f64, z as f64]))
        })
    }
}

use super::ImageError;

/// Row-major grayscale image with intensities normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width < 3 || height < 3 {
            return Err(ImageError::TooSmall { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::SizeMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(ImageError::InvalidIntensity {
                x: i % width,
                y: i / width,
                value: data[i],
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from `f(x, y)` evaluated at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Intensity at column `x`, row `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Applies `a * f + b` to every pixel. Fails if the result leaves `[0, 1]`.
    pub fn affine_intensity(&self, a: f64, b: f64) -> Result<Self, ImageError> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|v| a * v + b).collect(),
        )
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Per-pixel validity flags accompanying a synthesized image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    valid: Vec<bool>,
}

impl ValidityMask {
    pub fn all_valid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            valid: vec![true; width * height],
        }
    }

    pub(crate) fn from_vec(width: usize, height: usize, valid: Vec<bool>) -> Self {
        debug_assert_eq!(valid.len(), width * height);
        Self {
            width,
            height,
            valid,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.valid
    }

    /// Pixelwise AND of two masks of equal size.
    pub fn and(&self, other: &Self) -> Self {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Self {
            width: self.width,
            height: self.height,
            valid: self
                .valid
                .iter()
                .zip(&other.valid)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_and_out_of_range() {
        assert!(matches!(
            GrayImage::filled(2, 5, 0.5),
            Err(ImageError::TooSmall { .. })
        ));
        assert!(matches!(
            GrayImage::new(3, 3, vec![0.5; 8]),
            Err(ImageError::SizeMismatch { .. })
        ));
        let mut data = vec![0.5; 9];
        data[4] = 1.5;
        assert!(matches!(
            GrayImage::new(3, 3, data),
            Err(ImageError::InvalidIntensity { x: 1, y: 1, .. })
        ));
        let mut data = vec![0.5; 9];
        data[0] = f64::NAN;
        assert!(GrayImage::new(3, 3, data).is_err());
    }

    #[test]
    fn affine_intensity_checks_range() {
        let img = GrayImage::filled(4, 4, 0.5).unwrap();
        let out = img.affine_intensity(1.3, 0.1).unwrap();
        assert!((out.get(1, 1) - 0.75).abs() < 1e-15);
        assert!(img.affine_intensity(3.0, 0.0).is_err());
    }
}

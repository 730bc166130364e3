use serde::{Deserialize, Serialize};

use super::SpeckleError;

/// Pinhole imaging geometry for sizing the working distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupGeometry {
    /// Object extent to fit in the field of view, mm.
    pub object_dim: f64,
    /// Lens focal length, mm.
    pub focal_length: f64,
    /// Sensor size along the same axis, pixels.
    pub sensor_pixels: f64,
    /// Pixel pitch, mm.
    pub pixel_pitch: f64,
}

impl SetupGeometry {
    pub fn new(
        object_dim: f64,
        focal_length: f64,
        sensor_pixels: f64,
        pixel_pitch: f64,
    ) -> Result<Self, SpeckleError> {
        let g = Self {
            object_dim,
            focal_length,
            sensor_pixels,
            pixel_pitch,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), SpeckleError> {
        for (name, v) in [
            ("object_dim", self.object_dim),
            ("focal_length", self.focal_length),
            ("sensor_pixels", self.sensor_pixels),
            ("pixel_pitch", self.pixel_pitch),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpeckleError::InvalidGeometry(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Physical sensor width, mm.
    pub fn sensor_width(&self) -> f64 {
        self.sensor_pixels * self.pixel_pitch
    }
}

/// Object-to-sensor distance (mm) that fits `object_dim` onto the sensor:
/// `w f / S_w + f`.
pub fn optimal_distance(g: &SetupGeometry) -> Result<f64, SpeckleError> {
    g.validate()?;
    Ok(g.object_dim * g.focal_length / g.sensor_width() + g.focal_length)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_is_about_240_mm() {
        let g = SetupGeometry::new(60.0, 35.0, 2048.0, 0.005).unwrap();
        let od = optimal_distance(&g).unwrap();
        assert!((od - 240.0).abs() < 0.5, "{od}");
    }

    #[test]
    fn unit_magnification_is_twice_focal_length() {
        let g = SetupGeometry::new(10.24, 50.0, 2048.0, 0.005).unwrap();
        assert!((optimal_distance(&g).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn hand_arithmetic() {
        let g = SetupGeometry::new(100.0, 50.0, 1000.0, 0.01).unwrap();
        assert!((optimal_distance(&g).unwrap() - 550.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_inputs_rejected() {
        assert!(SetupGeometry::new(0.0, 35.0, 2048.0, 0.005).is_err());
        assert!(SetupGeometry::new(60.0, -1.0, 2048.0, 0.005).is_err());
    }
}

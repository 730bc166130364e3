//! Speckle patterns and their quality metrics.

mod generate;
mod metrics;
mod setup;

pub use generate::{gen_speckle, mean_granule_diameter, SpeckleParams, BASECOAT};
pub use metrics::{
    mig, quality_report, select_subset_size, sssig, sssig_from_gradients, ProbeSssig,
    QualityReport, GRAY_LEVELS, MIG_THRESHOLD,
};
pub use setup::{optimal_distance, SetupGeometry};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpeckleError {
    #[error("invalid speckle parameters: {0}")]
    InvalidParams(String),
    #[error("target density {target:.3} not reached after {attempts} granules (covered {reached:.3})")]
    DensityUnreachable {
        target: f64,
        reached: f64,
        attempts: usize,
    },
    #[error("subset of half-width {m} at ({x}, {y}) leaves the {width}x{height} image")]
    SubsetOutOfBounds {
        x: usize,
        y: usize,
        m: usize,
        width: usize,
        height: usize,
    },
    #[error("no subset half-width in [{m_min}, {m_max}] reaches SSSIG threshold {threshold}")]
    NoAdequateSubset {
        threshold: f64,
        m_min: usize,
        m_max: usize,
    },
    #[error("invalid setup geometry: {0}")]
    InvalidGeometry(String),
    #[error(transparent)]
    Image(#[from] crate::image::ImageError),
}

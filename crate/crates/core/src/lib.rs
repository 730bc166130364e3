//! Strainscope is a digital image correlation (DIC) engine.
//!
//! The crate covers the whole measurement chain:
//!
//! * [`image`]: grayscale containers, gradients, cubic interpolation and the
//!   analytic-warp image synthesizer used as ground truth throughout.
//! * [`speckle`]: speckle pattern generation and quality metrics (SSSIG, MIG),
//!   subset-size selection and the camera working-distance calculator.
//! * [`dic2d`]: subset matching with first/second-order shape functions,
//!   Newton-type refinement, reliability-guided propagation and strain windows.
//! * [`stereo`]: camera model, distortion, least-squares triangulation and
//!   triangle (Cosserat point) strain for stereo DIC.
//! * [`mechanics`]: viscoelastic and fracture post-processing of DIC fields.
//! * [`dvc`]: digital volume correlation over voxel grids.
//! * [`render`]: false-color maps of scalar fields.
//!
//! File I/O (PNG/TIFF images, volume files, PNG maps) is behind the default `io` feature;
//! worker-pool parallelism is behind the default `parallel` feature. Results
//! never depend on the number of workers.

pub mod dic2d;
pub mod dvc;
pub mod image;
pub mod mechanics;
pub mod render;
pub mod speckle;
pub mod stereo;

mod linalg;
mod par;

pub use par::with_workers;

pub use dic2d::{
    DeformVector, DisplacementField, MatchResult, RgdicOptions, RoiGrid, SeedPoint, ShapeOrder,
    StrainField, SubsetSpec,
};
pub use image::{AnalyticWarp, GradientField, GrayImage, Interpolator, ValidityMask};

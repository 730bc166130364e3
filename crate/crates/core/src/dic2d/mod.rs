//! Subset-based 2D digital image correlation.

mod cost;
mod grid;
mod refine;
mod rgdic;
mod search;
mod shape;
mod strain;

pub use cost::{cost, zncc_from_znssd, Criterion};
pub use grid::{DisplacementField, RoiGrid, SeedPoint};
pub use refine::{refine_nr, MatchResult, SolverOptions};
pub use rgdic::{rgdic, rgdic_sequence, FrameResult, RgdicOptions};
pub use search::{integer_search, IntegerMatch};
pub use shape::{warp_point, DeformVector, SecondOrderTerms, ShapeOrder, SubsetSpec};
pub use strain::{green_lagrange, strain_field, StrainField, DEFAULT_STRAIN_WINDOW};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DicError {
    #[error("subset at ({x}, {y}) with M = {m} does not fit in the image with the interpolation margin")]
    SubsetOutOfBounds { x: usize, y: usize, m: usize },
    #[error("warped subset leaves the interpolation domain")]
    WarpOutOfDomain,
    #[error("subset intensities have zero variance")]
    ZeroVarianceSubset,
    #[error("ZNSSD value {0} outside [0, 4]")]
    OutOfRange(f64),
    #[error("search window of radius {radius} around ({x}, {y}) leaves the deformed image")]
    SearchWindowOutOfBounds { x: usize, y: usize, radius: usize },
    #[error("Gauss-Newton Hessian is singular")]
    SingularHessian,
    #[error("refinement left the interpolation domain after {iterations} iterations")]
    DivergedOutOfDomain { iterations: usize },
    #[error("seed at ({x}, {y}) failed: zncc {zncc:.4} below floor")]
    SeedFailed { x: usize, y: usize, zncc: f64 },
    #[error("seed at ({x}, {y}) is not on an unmasked ROI grid point")]
    SeedOutsideRoi { x: usize, y: usize },
    #[error("partition {0} has no seed")]
    PartitionWithoutSeed(i32),
    #[error("ROI has no usable grid points")]
    EmptyRoi,
    #[error("no point has enough valid neighbors for a strain fit")]
    InsufficientSupport,
    #[error("reference is {0}x{1} but deformed image is {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("invalid option: {0}")]
    InvalidOptions(String),
}

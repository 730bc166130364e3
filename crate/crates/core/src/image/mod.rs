//! Grayscale images, gradients, subpixel interpolation and synthetic warping.

mod gradient;
mod gray;
mod interp;
#[cfg(feature = "io")]
mod io;
mod warp;

pub use gradient::{gradients, GradientField};
pub use gray::{GrayImage, ValidityMask};
pub use interp::{Interpolator, INTERP_MARGIN};
#[cfg(feature = "io")]
pub use io::{load_image, save_mask_summary, save_png16, save_png8, MaskSummary};
pub use warp::{synth_deform, synth_deform_with_noise, AnalyticWarp, SynthOutput};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image is {width}x{height}; at least 3x3 is required")]
    TooSmall { width: usize, height: usize },
    #[error("pixel buffer has {got} values, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("intensity at ({x}, {y}) is {value}; intensities must be finite and in [0, 1]")]
    InvalidIntensity { x: usize, y: usize, value: f64 },
    #[error("point ({x:.3}, {y:.3}) is outside the interpolation domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("warp is not invertible on the image domain: {0}")]
    NonInvertibleWarp(String),
    #[error("cannot read image {path}: {reason}")]
    UnreadableFile { path: String, reason: String },
    #[error("unsupported pixel format {0}; expected 8/16-bit gray or RGB")]
    UnsupportedBitDepth(String),
    #[error("cannot write {path}: {reason}")]
    WriteFailed { path: String, reason: String },
}

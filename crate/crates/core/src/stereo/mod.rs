//! Stereo camera model, triangulation and surface strain for stereo DIC.

mod camera;
mod pipeline;
mod synth;
mod triangle;
mod triangulate;

pub use camera::{stereo_extrinsics, CalibrationFile, Extrinsics, Intrinsics, StereoPose, StereoRig};
pub use pipeline::{
    grid_triangles, stereo_match, surface_kinematics, track_stereo_sequence, Correspondences,
    SurfaceFrame,
};
pub use synth::{render_view, Plane, SpeckleTexture};
pub use triangle::{triangle_strain, TriangleStrain};
pub use triangulate::triangulate;

use thiserror::Error;

use crate::dic2d::DicError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StereoError {
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("undistortion did not converge for pixel ({x:.3}, {y:.3})")]
    NoConvergence { x: f64, y: f64 },
    #[error("rays are (nearly) parallel; condition number {0:.3e}")]
    DegenerateGeometry(f64),
    #[error("triangle is degenerate")]
    DegenerateTriangle,
    #[error("invalid camera parameters: {0}")]
    InvalidCamera(String),
    #[error("frames are inconsistent: {0}")]
    InconsistentFrames(String),
    #[error(transparent)]
    Dic(#[from] DicError),
}

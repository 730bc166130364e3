use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::camera::StereoRig;
use super::triangulate::triangulate;
use super::StereoError;
use crate::dic2d::{rgdic, rgdic_sequence, DisplacementField, RgdicOptions, RoiGrid, SeedPoint};
use crate::image::GrayImage;

/// Matched left/right pixel positions (as observed, i.e. distorted) for
/// every ROI grid point of one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondences {
    pub grid: RoiGrid,
    pub left: Vec<Option<(f64, f64)>>,
    pub right: Vec<Option<(f64, f64)>>,
    pub zncc: Vec<f64>,
}

/// Left-to-right matching of the reference pair. Callers normally pass
/// second-order options ([`RgdicOptions::stereo`]) because perspective
/// differences between the views are not affine over a subset.
pub fn stereo_match(
    left: &GrayImage,
    right: &GrayImage,
    roi: &RoiGrid,
    seeds: &[SeedPoint],
    opts: &RgdicOptions,
) -> Result<DisplacementField, StereoError> {
    Ok(rgdic(left, right, roi, seeds, opts)?)
}

/// Grid over the bounding box of the right-image positions.
fn right_grid(stereo: &DisplacementField, width: usize, height: usize) -> Option<RoiGrid> {
    let g = &stereo.grid;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for i in 0..g.len() {
        if stereo.valid[i] {
            let (x, y) = g.point(i);
            let (xr, yr) = (x as f64 + stereo.u[i], y as f64 + stereo.v[i]);
            x0 = x0.min(xr);
            y0 = y0.min(yr);
            x1 = x1.max(xr);
            y1 = y1.max(yr);
        }
    }
    if x0 > x1 {
        return None;
    }
    let pad = g.spacing as f64;
    let clamp = |v: f64, hi: usize| v.max(0.0).min((hi - 1) as f64) as usize;
    RoiGrid::rect(
        clamp((x0 - pad).floor(), width),
        clamp((y0 - pad).floor(), height),
        clamp((x1 + pad).ceil(), width),
        clamp((y1 + pad).ceil(), height),
        g.spacing,
    )
    .ok()
}

/// Stereo matching once on the reference pair, then temporal matching of
/// each camera's sequence against its own reference.
///
/// Returns the reference correspondences followed by one set per frame.
/// The right camera's displacement is interpolated at the stereo-matched
/// positions.
#[allow(clippy::too_many_arguments)]
pub fn track_stereo_sequence(
    left_ref: &GrayImage,
    right_ref: &GrayImage,
    left_frames: &[GrayImage],
    right_frames: &[GrayImage],
    roi: &RoiGrid,
    seeds: &[SeedPoint],
    stereo_opts: &RgdicOptions,
    temporal_opts: &RgdicOptions,
) -> Result<Vec<Correspondences>, StereoError> {
    if left_frames.len() != right_frames.len() {
        return Err(StereoError::InconsistentFrames(format!(
            "{} left frames but {} right frames",
            left_frames.len(),
            right_frames.len()
        )));
    }
    let stereo = stereo_match(left_ref, right_ref, roi, seeds, stereo_opts)?;
    let grid = stereo.grid.clone();
    let n = grid.len();
    let right_at = |i: usize| {
        let (x, y) = grid.point(i);
        (x as f64 + stereo.u[i], y as f64 + stereo.v[i])
    };
    let mut out = vec![Correspondences {
        grid: grid.clone(),
        left: (0..n)
            .map(|i| {
                stereo.valid[i].then(|| {
                    let (x, y) = grid.point(i);
                    (x as f64, y as f64)
                })
            })
            .collect(),
        right: (0..n).map(|i| stereo.valid[i].then(|| right_at(i))).collect(),
        zncc: stereo.zncc.clone(),
    }];
    if left_frames.is_empty() {
        return Ok(out);
    }

    let rgrid = right_grid(&stereo, right_ref.width(), right_ref.height())
        .ok_or(StereoError::Dic(crate::dic2d::DicError::EmptyRoi))?;
    let right_seeds: Vec<SeedPoint> = seeds
        .iter()
        .filter_map(|s| grid.index_of(s.x, s.y))
        .filter(|&i| stereo.valid[i])
        .filter_map(|i| {
            let (xr, yr) = right_at(i);
            rgrid.nearest(xr, yr).map(|j| {
                let (x, y) = rgrid.point(j);
                SeedPoint::at(x, y)
            })
        })
        .collect();
    let left_seq = rgdic_sequence(left_ref, left_frames, roi, seeds, temporal_opts)?;
    let right_seq = rgdic_sequence(right_ref, right_frames, &rgrid, &right_seeds, temporal_opts)?;

    for (lf, rf) in left_seq.iter().zip(&right_seq) {
        let (lf, rf) = (&lf.field, &rf.field);
        let mut c = Correspondences {
            grid: grid.clone(),
            left: vec![None; n],
            right: vec![None; n],
            zncc: vec![f64::NAN; n],
        };
        for i in 0..n {
            if !(stereo.valid[i] && lf.valid[i]) {
                continue;
            }
            let (xr, yr) = right_at(i);
            if let Some((du, dv, zr)) = rf.sample(xr, yr) {
                let (x, y) = grid.point(i);
                c.left[i] = Some((x as f64 + lf.u[i], y as f64 + lf.v[i]));
                c.right[i] = Some((xr + du, yr + dv));
                c.zncc[i] = stereo.zncc[i].min(lf.zncc[i]).min(zr);
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// 3D positions and displacements (relative to the first frame) of every
/// grid point, in the left-camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFrame {
    pub points: Vec<Option<Vector3<f64>>>,
    pub displacement: Vec<Option<Vector3<f64>>>,
    pub zncc: Vec<f64>,
}

/// Undistorts and triangulates every frame; the first frame is the
/// reference configuration.
pub fn surface_kinematics(
    frames: &[Correspondences],
    rig: &StereoRig,
) -> Result<Vec<SurfaceFrame>, StereoError> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let n = first.grid.len();
    let mut out: Vec<SurfaceFrame> = Vec::with_capacity(frames.len());
    for f in frames {
        if f.left.len() != n || f.right.len() != n {
            return Err(StereoError::InconsistentFrames(
                "frames use different grids".into(),
            ));
        }
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let p = match (f.left[i], f.right[i]) {
                (Some(l), Some(r)) => {
                    let l = rig.left.undistort(l.0, l.1)?;
                    let r = rig.right.undistort(r.0, r.1)?;
                    match triangulate(rig, l, r) {
                        Ok(p) => Some(p),
                        Err(StereoError::DegenerateGeometry(_)) => None,
                        Err(e) => return Err(e),
                    }
                }
                _ => None,
            };
            points.push(p);
        }
        let displacement = match out.first() {
            None => points.iter().map(|p| p.map(|_| Vector3::zeros())).collect(),
            Some(r) => points
                .iter()
                .zip(&r.points)
                .map(|(p, q)| Some(p.as_ref()? - q.as_ref()?))
                .collect(),
        };
        out.push(SurfaceFrame {
            points,
            displacement,
            zncc: f.zncc.clone(),
        });
    }
    Ok(out)
}

/// Two triangles per grid cell, kept when all three corners are valid.
pub fn grid_triangles(grid: &RoiGrid, valid: &[bool]) -> Vec<[usize; 3]> {
    let mut tris = Vec::new();
    for r in 0..grid.rows.saturating_sub(1) {
        for c in 0..grid.cols.saturating_sub(1) {
            let (a, b) = (grid.index(r, c), grid.index(r, c + 1));
            let (d, e) = (grid.index(r + 1, c), grid.index(r + 1, c + 1));
            for t in [[a, b, e], [a, e, d]] {
                if t.iter().all(|&i| valid[i]) {
                    tris.push(t);
                }
            }
        }
    }
    tris
}

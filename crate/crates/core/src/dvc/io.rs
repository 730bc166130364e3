use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DvcError, Volume};
use crate::image::load_image;

/// Volume header. Exactly one of `slice_pattern` (PNG/TIFF slices, `{z}`
/// or zero-padded `{z:03}` replaced by the slice index) and `raw` (little
/// endian 32-bit floats, x fastest) must be set. Paths are relative to the
/// header file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

fn slice_name(pattern: &str, z: usize) -> Result<String, DvcError> {
    let start = pattern
        .find("{z")
        .ok_or_else(|| DvcError::Io(format!("slice pattern {pattern:?} lacks {{z}}")))?;
    let end = start
        + pattern[start..]
            .find('}')
            .ok_or_else(|| DvcError::Io(format!("unterminated placeholder in {pattern:?}")))?;
    let spec = &pattern[start + 2..end];
    let width = match spec.strip_prefix(':') {
        None if spec.is_empty() => 0,
        Some(w) => w
            .parse::<usize>()
            .map_err(|_| DvcError::Io(format!("bad width {w:?} in slice pattern")))?,
        _ => return Err(DvcError::Io(format!("bad placeholder in {pattern:?}"))),
    };
    Ok(format!("{}{:0width$}{}", &pattern[..start], z, &pattern[end + 1..]))
}

fn read_header(header_path: &Path) -> Result<VolumeHeader, DvcError> {
    let text = fs::read_to_string(header_path)
        .map_err(|e| DvcError::Io(format!("{}: {e}", header_path.display())))?;
    serde_json::from_str(&text).map_err(|e| DvcError::Io(format!("{}: {e}", header_path.display())))
}

/// Data files a header refers to: every slice, or the raw file.
pub fn volume_files(header_path: &Path) -> Result<Vec<PathBuf>, DvcError> {
    let h = read_header(header_path)?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    match (&h.slice_pattern, &h.raw) {
        (Some(pattern), None) => (0..h.nz).map(|z| Ok(dir.join(slice_name(pattern, z)?))).collect(),
        (None, Some(raw)) => Ok(vec![dir.join(raw)]),
        _ => Err(DvcError::Io("header needs exactly one of slice_pattern and raw".into())),
    }
}

pub fn load_volume(header_path: &Path) -> Result<Volume, DvcError> {
    let h = read_header(header_path)?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    match (&h.slice_pattern, &h.raw) {
        (Some(pattern), None) => {
            let mut data = Vec::with_capacity(h.nx * h.ny * h.nz);
            for z in 0..h.nz {
                let path = dir.join(slice_name(pattern, z)?);
                let img = load_image(&path).map_err(|e| DvcError::Io(e.to_string()))?;
                if (img.width(), img.height()) != (h.nx, h.ny) {
                    return Err(DvcError::InvalidVolume(format!(
                        "{} is {}x{}, header says {}x{}",
                        path.display(),
                        img.width(),
                        img.height(),
                        h.nx,
                        h.ny
                    )));
                }
                data.extend_from_slice(img.data());
            }
            Volume::new(h.nx, h.ny, h.nz, data)
        }
        (None, Some(raw)) => {
            let path = dir.join(raw);
            let bytes = fs::read(&path).map_err(|e| DvcError::Io(format!("{}: {e}", path.display())))?;
            if bytes.len() != 4 * h.nx * h.ny * h.nz {
                return Err(DvcError::InvalidVolume(format!(
                    "{} has {} bytes, expected {}",
                    path.display(),
                    bytes.len(),
                    4 * h.nx * h.ny * h.nz
                )));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Volume::new(h.nx, h.ny, h.nz, data)
        }
        _ => Err(DvcError::Io("header needs exactly one of slice_pattern and raw".into())),
    }
}

/// Writes `raw_name` (f32 little endian) next to `header_path` and the
/// header itself.
pub fn save_volume_raw(vol: &Volume, header_path: &Path, raw_name: &str) -> Result<(), DvcError> {
    let (nx, ny, nz) = vol.dims();
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let bytes: Vec<u8> = vol.data().iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    let io = |e: std::io::Error| DvcError::Io(e.to_string());
    fs::write(dir.join(raw_name), bytes).map_err(io)?;
    let h = VolumeHeader {
        nx,
        ny,
        nz,
        slice_pattern: None,
        raw: Some(raw_name.into()),
    };
    let json = serde_json::to_string_pretty(&h).map_err(|e| DvcError::Io(e.to_string()))?;
    fs::write(header_path, json).map_err(io)
}

#[cfg(test)]
fn slice(vol: &Volume, z: usize) -> crate::image::GrayImage {
    let (nx, ny, _) = vol.dims();
    crate::image::GrayImage::new(nx, ny, vol.data()[z * nx * ny..(z + 1) * nx * ny].to_vec()).expect("slice of a valid volume")
}

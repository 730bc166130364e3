use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::DynamicImage;
use serde::{Deserialize, Serialize};

use super::{GrayImage, ImageError, ValidityMask};

/// Reads an 8/16-bit gray or RGB(A) PNG/TIFF and normalizes it to `[0, 1]`.
///
/// Color is reduced by the plain channel average; alpha is ignored.
pub fn load_image(path: &Path) -> Result<GrayImage, ImageError> {
    let unreadable = |reason: String| ImageError::UnreadableFile {
        path: path.display().to_string(),
        reason,
    };
    let dynimg = image::ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?
        .decode()
        .map_err(|e| unreadable(e.to_string()))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    if w < 3 || h < 3 {
        return Err(ImageError::TooSmall {
            width: w,
            height: h,
        });
    }
    let data: Vec<f64> = match &dynimg {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / (3.0 * 255.0))
            .collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / (3.0 * 255.0))
            .collect(),
        DynamicImage::ImageRgb16(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / (3.0 * 65535.0))
            .collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / (3.0 * 65535.0))
            .collect(),
        other => return Err(ImageError::UnsupportedBitDepth(format!("{:?}", other.color()))),
    };
    GrayImage::new(w, h, data)
}

fn write_png(path: &Path, w: usize, h: usize, depth: png::BitDepth, bytes: &[u8]) -> Result<(), ImageError> {
    let fail = |reason: String| ImageError::WriteFailed {
        path: path.display().to_string(),
        reason,
    };
    let file = File::create(path).map_err(|e| fail(e.to_string()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(depth);
    let mut writer = enc.write_header().map_err(|e| fail(e.to_string()))?;
    writer
        .write_image_data(bytes)
        .map_err(|e| fail(e.to_string()))?;
    writer.finish().map_err(|e| fail(e.to_string()))
}

/// Writes a 16-bit grayscale PNG (round to nearest level).
pub fn save_png16(img: &GrayImage, path: &Path) -> Result<(), ImageError> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .flat_map(|v| ((v * 65535.0).round() as u16).to_be_bytes())
        .collect();
    write_png(path, img.width(), img.height(), png::BitDepth::Sixteen, &bytes)
}

/// Writes an 8-bit grayscale PNG (round to nearest level).
pub fn save_png8(img: &GrayImage, path: &Path) -> Result<(), ImageError> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    write_png(path, img.width(), img.height(), png::BitDepth::Eight, &bytes)
}

/// Sidecar description of a validity mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub width: usize,
    pub height: usize,
    pub valid_pixels: usize,
    pub invalid_pixels: usize,
    pub valid_fraction: f64,
    /// Inclusive bounding box `[x_min, y_min, x_max, y_max]` of valid pixels.
    pub valid_bbox: Option<[usize; 4]>,
}

impl MaskSummary {
    pub fn of(mask: &ValidityMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut bbox: Option<[usize; 4]> = None;
        for y in 0..h {
            for x in 0..w {
                if mask.is_valid(x, y) {
                    bbox = Some(match bbox {
                        None => [x, y, x, y],
                        Some([x0, y0, x1, y1]) => [x0.min(x), y0.min(y), x1.max(x), y1.max(y)],
                    });
                }
            }
        }
        let valid = mask.valid_count();
        Self {
            width: w,
            height: h,
            valid_pixels: valid,
            invalid_pixels: w * h - valid,
            valid_fraction: valid as f64 / (w * h) as f64,
            valid_bbox: bbox,
        }
    }
}

pub fn save_mask_summary(mask: &ValidityMask, path: &Path) -> Result<MaskSummary, ImageError> {
    let summary = MaskSummary::of(mask);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(path, json).map_err(|e| ImageError::WriteFailed {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(summary)
}

//! False-color rendering of scalar grid fields.
//!
//! Invalid points are fully transparent. A vertical colour bar sits to the
//! right of the map, and the value range travels with the PNG as a `tEXt`
//! chunk so the scale is recoverable from the file alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("field has no valid finite values")]
    EmptyField,
    #[error("field is {0} values but the grid is {1} x {2}")]
    SizeMismatch(usize, usize, usize),
    #[error("invalid range [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("writing {0}: {1}")]
    Write(String, String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    #[default]
    Viridis,
    Jet,
    Gray,
}

const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

const JET: [[u8; 3]; 5] = [[0, 0, 143], [0, 128, 255], [128, 255, 128], [255, 128, 0], [128, 0, 0]];

impl Palette {
    /// Colour at `t` in `[0, 1]` (clamped).
    pub fn color(self, t: f64) -> [u8; 3] {
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
        let table: &[[u8; 3]] = match self {
            Palette::Viridis => &VIRIDIS,
            Palette::Jet => &JET,
            Palette::Gray => &[[0, 0, 0], [255, 255, 255]],
        };
        let x = t * (table.len() - 1) as f64;
        let i = (x.floor() as usize).min(table.len() - 2);
        let f = x - i as f64;
        let mut out = [0u8; 3];
        for c in 0..3 {
            let v = table[i][c] as f64 + f * (table[i + 1][c] as f64 - table[i][c] as f64);
            out[c] = v.round() as u8;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub palette: Palette,
    /// Fixed value range; the valid data range when `None`.
    pub range: Option<(f64, f64)>,
    /// Pixels per grid cell.
    pub cell: usize,
    pub color_bar: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            palette: Palette::Viridis,
            range: None,
            cell: 4,
            color_bar: true,
        }
    }
}

/// Straight RGBA8 raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorMap {
    pub width: usize,
    pub height: usize,
    pub rgba: Vec<u8>,
    pub range: (f64, f64),
    pub palette: Palette,
}

const BAR_GAP: usize = 4;
const BAR_WIDTH: usize = 12;

/// Renders a `cols` x `rows` row-major field; points that are invalid or
/// non-finite become transparent.
pub fn render_map(
    values: &[f64],
    valid: &[bool],
    cols: usize,
    rows: usize,
    opts: &RenderOptions,
) -> Result<ColorMap, RenderError> {
    if values.len() != cols * rows || valid.len() != values.len() {
        return Err(RenderError::SizeMismatch(values.len(), cols, rows));
    }
    let ok = |i: usize| valid[i] && values[i].is_finite();
    let (lo, hi) = match opts.range {
        Some((a, b)) => {
            if !(a.is_finite() && b.is_finite() && b >= a) {
                return Err(RenderError::BadRange(a, b));
            }
            (a, b)
        }
        None => {
            let mut it = (0..values.len()).filter(|&i| ok(i)).map(|i| values[i]);
            let first = it.next().ok_or(RenderError::EmptyField)?;
            it.fold((first, first), |(a, b), v| (a.min(v), b.max(v)))
        }
    };
    if !(0..values.len()).any(ok) {
        return Err(RenderError::EmptyField);
    }
    let cell = opts.cell.max(1);
    let map_w = cols * cell;
    let height = rows * cell;
    let width = if opts.color_bar { map_w + BAR_GAP + BAR_WIDTH } else { map_w };
    let mut rgba = vec![0u8; width * height * 4];
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let mut put = |x: usize, y: usize, c: [u8; 3]| {
        let o = 4 * (y * width + x);
        rgba[o..o + 3].copy_from_slice(&c);
        rgba[o + 3] = 255;
    };
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if !ok(i) {
                continue;
            }
            let color = opts.palette.color(norm(values[i]));
            for y in r * cell..(r + 1) * cell {
                for x in c * cell..(c + 1) * cell {
                    put(x, y, color);
                }
            }
        }
    }
    if opts.color_bar {
        // top = maximum
        for y in 0..height {
            let t = if height > 1 { 1.0 - y as f64 / (height - 1) as f64 } else { 0.5 };
            let color = opts.palette.color(t);
            for x in map_w + BAR_GAP..width {
                put(x, y, color);
            }
        }
    }
    Ok(ColorMap {
        width,
        height,
        rgba,
        range: (lo, hi),
        palette: opts.palette,
    })
}

#[cfg(feature = "io")]
impl ColorMap {
    /// PNG bytes with the range in a `tEXt` chunk keyed `strainscope:range`.
    pub fn to_png(&self) -> Result<Vec<u8>, RenderError> {
        let fail = |e: String| RenderError::Write("png".into(), e);
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            enc.add_text_chunk(
                "strainscope:range".into(),
                format!("{:e} {:e}", self.range.0, self.range.1),
            )
            .map_err(|e| fail(e.to_string()))?;
            enc.add_text_chunk("strainscope:palette".into(), format!("{:?}", self.palette).to_lowercase())
                .map_err(|e| fail(e.to_string()))?;
            let mut w = enc.write_header().map_err(|e| fail(e.to_string()))?;
            w.write_image_data(&self.rgba).map_err(|e| fail(e.to_string()))?;
            w.finish().map_err(|e| fail(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn save_png(&self, path: &std::path::Path) -> Result<(), RenderError> {
        let bytes = self.to_png()?;
        std::fs::write(path, bytes).map_err(|e| RenderError::Write(path.display().to_string(), e.to_string()))
    }
}

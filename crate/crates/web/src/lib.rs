//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Build with `wasm-pack build crates/web --target web --out-dir www/pkg`
//! and serve `crates/web/www` as static files.

use wasm_bindgen::prelude::*;

use strainscope::dic2d::{
    integer_search, refine_nr, rgdic, strain_field, DeformVector, RgdicOptions, RoiGrid, SeedPoint, ShapeOrder,
    SolverOptions, SubsetSpec,
};
use strainscope::image::{synth_deform, AnalyticWarp, GrayImage, Interpolator};
use strainscope::render::{render_map, Palette, RenderOptions};
use strainscope::speckle::{gen_speckle, mean_granule_diameter, mig, SpeckleParams};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_rgba(img: &GrayImage) -> Vec<u8> {
    img.data()
        .iter()
        .flat_map(|v| {
            let g = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// A generated speckle pattern plus its quality numbers.
#[wasm_bindgen]
pub struct Pattern {
    image: GrayImage,
}

#[wasm_bindgen]
impl Pattern {
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, height: usize, density: f64, granule_radius: f64, seed: u32) -> Result<Pattern, JsValue> {
        let params = SpeckleParams {
            density,
            granule_radius,
            rng_seed: seed as u64,
            ..SpeckleParams::default()
        };
        let image = gen_speckle(&params, width, height).map_err(js_err)?;
        Ok(Pattern { image })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Mean intensity gradient, 0..255 gray-level scale.
    pub fn mig(&self) -> f64 {
        mig(&self.image)
    }

    /// Mean granule diameter in px, NaN when it cannot be measured.
    pub fn granule_diameter(&self) -> f64 {
        mean_granule_diameter(&self.image).unwrap_or(f64::NAN)
    }

    /// Pixels for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        to_rgba(&self.image)
    }

    /// Translates the pattern by `(u, v)` px and recovers the shift at
    /// `(x, y)` with a `(2m+1)^2` subset. Returns `[u, v, zncc, iterations]`.
    pub fn match_shift(&self, x: usize, y: usize, m: usize, u: f64, v: f64) -> Result<Vec<f64>, JsValue> {
        let def = synth_deform(&self.image, &AnalyticWarp::Translation { u, v }).map_err(js_err)?;
        let subset = SubsetSpec::new(x, y, m);
        let start = integer_search(&self.image, &def.image, &subset, 3).map_err(js_err)?;
        let p0 = DeformVector::translation(ShapeOrder::First, start.du as f64, start.dv as f64);
        let itp = Interpolator::new(&def.image);
        let r = refine_nr(&self.image, &itp, &subset, &p0, &SolverOptions::default()).map_err(js_err)?;
        let (mu, mv) = r.p.displacement(0.0, 0.0);
        Ok(vec![mu, mv, r.c_zncc, r.iterations as f64])
    }

    /// Stretches the pattern by `(exx, eyy)` about its center, correlates it
    /// and renders the measured `e_xx` map.
    pub fn strain_map(&self, exx: f64, eyy: f64, spacing: usize, m: usize) -> Result<StrainMap, JsValue> {
        let (w, h) = (self.image.width(), self.image.height());
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        let warp = AnalyticWarp::Affine {
            u: 0.0,
            v: 0.0,
            ux: exx,
            uy: 0.0,
            vx: 0.0,
            vy: eyy,
            cx,
            cy,
        };
        let def = synth_deform(&self.image, &warp).map_err(js_err)?;
        let roi = RoiGrid::rect(0, 0, w - 1, h - 1, spacing.max(1)).map_err(js_err)?;
        let seed = roi.nearest(cx, cy).map(|i| roi.point(i)).ok_or_else(|| js_err("empty grid"))?;
        let opts = RgdicOptions { m, ..RgdicOptions::default() };
        let disp = rgdic(&self.image, &def.image, &roi, &[SeedPoint::at(seed.0, seed.1)], &opts).map_err(js_err)?;
        let s = strain_field(&disp, 3).map_err(js_err)?;
        let opts = RenderOptions {
            palette: Palette::Viridis,
            range: None,
            cell: 4,
            color_bar: true,
        };
        let map = render_map(&s.exx, &s.valid, s.grid.cols, s.grid.rows, &opts).map_err(js_err)?;
        let valid: Vec<f64> = s.exx.iter().zip(&s.valid).filter(|(_, ok)| **ok).map(|(e, _)| *e).collect();
        let mean = valid.iter().sum::<f64>() / valid.len().max(1) as f64;
        Ok(StrainMap {
            width: map.width,
            height: map.height,
            rgba: map.rgba,
            min: map.range.0,
            max: map.range.1,
            mean,
        })
    }
}

#[wasm_bindgen]
pub struct StrainMap {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    min: f64,
    max: f64,
    mean: f64,
}

#[wasm_bindgen]
impl StrainMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Mean measured `e_xx` over valid points.
    pub fn mean(&self) -> f64 {
        self.mean
    }
}

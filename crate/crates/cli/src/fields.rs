//! ROI/seed specs and the CSV layouts of field data.
//!
//! Displacement CSV columns: `x, y, u, v, zncc, valid`, one row per grid
//! point in row-major grid order. Failed or masked points have empty
//! `u, v, zncc` and `valid = 0`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use strainscope::dic2d::{DisplacementField, RoiGrid, SeedPoint, StrainField};
use strainscope::image::load_image;
use strainscope::render::{render_map, Palette, RenderOptions};

use crate::run::{read_json, CliError, Run};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Partition {
    pub label: i32,
    pub polygon: Vec<[f64; 2]>,
}

/// ROI file. Every part is optional; the default is the whole image.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiSpec {
    /// Inclusive `[x0, y0, x1, y1]` in pixels.
    #[serde(default)]
    pub rect: Option<[usize; 4]>,
    #[serde(default)]
    pub polygon: Option<Vec<[f64; 2]>>,
    /// Image whose pixels above mid-gray are inside the ROI. Relative paths
    /// resolve against the ROI file.
    #[serde(default)]
    pub mask: Option<PathBuf>,
    /// Labeled regions that must not exchange information (for example the
    /// two faces of a crack). Each needs its own seed.
    #[serde(default)]
    pub partitions: Vec<Partition>,
}

fn polygon(p: &[[f64; 2]]) -> Vec<(f64, f64)> {
    p.iter().map(|q| (q[0], q[1])).collect()
}

impl RoiSpec {
    pub fn load(path: Option<&Path>, run: &mut Run) -> Result<(Self, PathBuf), CliError> {
        match path {
            None => Ok((Self::default(), PathBuf::from("."))),
            Some(p) => {
                run.input(p)?;
                let spec: Self = read_json(p)?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                if let Some(m) = &spec.mask {
                    run.input(&base.join(m))?;
                }
                for part in &spec.partitions {
                    if part.label == 0 {
                        return Err(CliError::validation("partition label 0 is reserved"));
                    }
                    if part.polygon.len() < 3 {
                        return Err(CliError::validation(format!(
                            "partition {} needs a polygon with at least 3 vertices",
                            part.label
                        )));
                    }
                }
                Ok((spec, base))
            }
        }
    }

    pub fn grid(&self, base: &Path, width: usize, height: usize, spacing: usize) -> Result<RoiGrid, CliError> {
        let [x0, y0, x1, y1] = self.rect.unwrap_or([0, 0, width - 1, height - 1]);
        if x1 >= width || y1 >= height {
            return Err(CliError::validation(format!(
                "ROI rectangle ({x0}, {y0})-({x1}, {y1}) exceeds the {width}x{height} image"
            )));
        }
        let mut grid = RoiGrid::rect(x0, y0, x1, y1, spacing)?;
        if let Some(p) = &self.polygon {
            grid.retain_polygon(&polygon(p));
        }
        if let Some(m) = &self.mask {
            let mask = load_image(&base.join(m))?;
            if (mask.width(), mask.height()) != (width, height) {
                return Err(CliError::validation("ROI mask size differs from the images"));
            }
            grid.retain(|x, y| mask.get(x, y) > 0.5);
        }
        self.apply_labels(&mut grid);
        Ok(grid)
    }

    /// Labels grid points by the first partition containing them.
    pub fn apply_labels(&self, grid: &mut RoiGrid) {
        let mut labels = vec![0; grid.len()];
        for part in self.partitions.iter().rev() {
            let mut g = grid.clone();
            g.mask.iter_mut().for_each(|m| *m = true);
            g.retain_polygon(&polygon(&part.polygon));
            for (l, inside) in labels.iter_mut().zip(&g.mask) {
                if *inside {
                    *l = part.label;
                }
            }
        }
        grid.labels = labels;
    }
}

pub fn load_seeds(path: &Path, run: &mut Run) -> Result<Vec<SeedPoint>, CliError> {
    run.input(path)?;
    let seeds: Vec<SeedPoint> = read_json(path)?;
    if seeds.is_empty() {
        return Err(CliError::validation("seed file lists no seeds"));
    }
    Ok(seeds)
}

pub fn num(x: f64, decimals: usize) -> String {
    if x.is_finite() {
        let s = format!("{x:.decimals$}");
        // avoid "-0.000000"
        if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
            s[1..].to_string()
        } else {
            s
        }
    } else {
        String::new()
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::analysis(format!("cannot write {}: {e}", path.display())))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::analysis(format!("cannot write {}: {e}", path.display()))
}

pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush()
        .map_err(|e| CliError::analysis(format!("cannot write {}: {e}", path.display())))
}

pub fn write_displacement(path: &Path, d: &DisplacementField) -> Result<(), CliError> {
    let rows = (0..d.grid.len()).map(|i| {
        let (x, y) = d.grid.point(i);
        let ok = d.valid[i];
        let f = |v: f64| if ok { num(v, 6) } else { String::new() };
        vec![
            x.to_string(),
            y.to_string(),
            f(d.u[i]),
            f(d.v[i]),
            f(d.zncc[i]),
            (ok as u8).to_string(),
        ]
    });
    write_rows(path, &["x", "y", "u", "v", "zncc", "valid"], rows)
}

#[derive(Deserialize)]
struct DispRow {
    x: usize,
    y: usize,
    u: Option<f64>,
    v: Option<f64>,
    zncc: Option<f64>,
    valid: u8,
}

/// Reads a displacement CSV back onto its grid. Partition labels are not
/// stored in the CSV; pass the ROI used for the run to restore them.
pub fn read_displacement(path: &Path, roi: Option<&RoiSpec>) -> Result<DisplacementField, CliError> {
    let bad = |msg: String| CliError::validation(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let rows: Vec<DispRow> = r
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| bad(e.to_string()))?;
    if rows.is_empty() {
        return Err(bad("no rows".into()));
    }
    let step = |vals: Vec<usize>| {
        let mut v = vals;
        v.sort_unstable();
        v.dedup();
        let s = v.windows(2).map(|w| w[1] - w[0]).min();
        (v[0], *v.last().unwrap(), s)
    };
    let (x0, x1, sx) = step(rows.iter().map(|r| r.x).collect());
    let (y0, y1, sy) = step(rows.iter().map(|r| r.y).collect());
    let spacing = sx.or(sy).unwrap_or(1);
    let mut grid = RoiGrid::rect(x0, y0, x1, y1, spacing).map_err(|e| bad(e.to_string()))?;
    if grid.len() != rows.len() {
        return Err(bad(format!("{} rows do not form a regular grid", rows.len())));
    }
    if let Some(spec) = roi {
        spec.apply_labels(&mut grid);
    }
    let mut d = DisplacementField::empty(grid);
    for (i, row) in rows.iter().enumerate() {
        if d.grid.point(i) != (row.x, row.y) {
            return Err(bad(format!("row {} is out of grid order", i + 1)));
        }
        if row.valid != 0 {
            match (row.u, row.v) {
                (Some(u), Some(v)) => {
                    d.u[i] = u;
                    d.v[i] = v;
                    d.zncc[i] = row.zncc.unwrap_or(f64::NAN);
                    d.valid[i] = true;
                }
                _ => return Err(bad(format!("row {} is valid but lacks u or v", i + 1))),
            }
        }
    }
    Ok(d)
}

pub fn write_strain(path: &Path, s: &StrainField) -> Result<(), CliError> {
    let rows = (0..s.grid.len()).map(|i| {
        let (x, y) = s.grid.point(i);
        let ok = s.valid[i];
        let f = |v: f64| if ok { num(v, 9) } else { String::new() };
        vec![
            x.to_string(),
            y.to_string(),
            f(s.exx[i]),
            f(s.eyy[i]),
            f(s.exy[i]),
            (ok as u8).to_string(),
        ]
    });
    write_rows(path, &["x", "y", "exx", "eyy", "exy", "valid"], rows)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PaletteArg {
    Viridis,
    Jet,
    Gray,
}

impl From<PaletteArg> for Palette {
    fn from(p: PaletteArg) -> Self {
        match p {
            PaletteArg::Viridis => Palette::Viridis,
            PaletteArg::Jet => Palette::Jet,
            PaletteArg::Gray => Palette::Gray,
        }
    }
}

pub fn save_map(
    run: &mut Run,
    name: &str,
    values: &[f64],
    valid: &[bool],
    grid: &RoiGrid,
    opts: &RenderOptions,
) -> Result<(), CliError> {
    let path = run.output(name)?;
    render_map(values, valid, grid.cols, grid.rows, opts)?.save_png(&path)?;
    Ok(())
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated numbers, got '{s}'"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok((p(a)?, p(b)?))
}

pub fn parse_point(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected x,y pixel coordinates, got '{s}'"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    Ok((p(a)?, p(b)?))
}

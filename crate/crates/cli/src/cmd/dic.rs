use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nalgebra::Vector3;
use serde::Serialize;

use strainscope::dic2d::{rgdic_sequence, strain_field, SolverOptions, DEFAULT_STRAIN_WINDOW};
use strainscope::image::load_image;
use strainscope::render::RenderOptions;
use strainscope::stereo::{
    grid_triangles, surface_kinematics, track_stereo_sequence, triangle_strain, CalibrationFile,
};
use strainscope::{GrayImage, RgdicOptions, ShapeOrder};

use crate::fields::{
    load_seeds, num, parse_pair, read_displacement, save_map, write_displacement, write_rows,
    write_strain, PaletteArg, RoiSpec,
};
use crate::run::{read_json, CliError, Run};

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OrderArg {
    First,
    Second,
}

/// Correlation flags shared by the 2D and stereo runs.
#[derive(Args, Debug, Serialize)]
pub struct DicFlags {
    /// Subset half-width M, px; subsets are (2M+1)^2.
    #[arg(long, default_value_t = 15)]
    pub subset_m: usize,
    /// Grid spacing, px.
    #[arg(long, default_value_t = 5)]
    pub spacing: usize,
    /// Shape function order.
    #[arg(long, value_enum, default_value_t = OrderArg::First)]
    pub order: OrderArg,
    /// Convergence tolerance on the shape update, px.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Points correlating below this ZNCC are invalid.
    #[arg(long, default_value_t = 0.5)]
    pub zncc_floor: f64,
    /// Integer search radius for seeds, px.
    #[arg(long, default_value_t = 10)]
    pub search_radius: usize,
    /// Re-anchor on intermediate frames when the valid fraction drops below 0.8.
    #[arg(long)]
    pub incremental: bool,
}

impl DicFlags {
    pub fn options(&self, order: ShapeOrder) -> Result<RgdicOptions, CliError> {
        if self.spacing == 0 {
            return Err(CliError::validation("--spacing must be at least 1"));
        }
        Ok(RgdicOptions {
            m: self.subset_m,
            order,
            solver: SolverOptions {
                tol: self.tol,
                max_iter: self.max_iter,
            },
            zncc_floor: self.zncc_floor,
            search_radius: self.search_radius,
            incremental: self.incremental,
            ..RgdicOptions::default()
        })
    }

    fn order(&self) -> ShapeOrder {
        match self.order {
            OrderArg::First => ShapeOrder::First,
            OrderArg::Second => ShapeOrder::Second,
        }
    }
}

fn load_images(paths: &[PathBuf], run: &mut Run) -> Result<Vec<GrayImage>, CliError> {
    paths
        .iter()
        .map(|p| {
            run.input(p)?;
            Ok(load_image(p)?)
        })
        .collect()
}

#[derive(Args, Debug, Serialize)]
pub struct RunArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// Deformed images in time order.
    #[arg(long, num_args = 1.., required = true)]
    pub deformed: Vec<PathBuf>,
    /// ROI JSON: {"rect": [x0, y0, x1, y1], "polygon": [[x, y], ...],
    /// "mask": "mask.png", "partitions": [{"label": 1, "polygon": [...]}]}.
    #[arg(long)]
    pub roi: Option<PathBuf>,
    /// Seed JSON: [{"x": 100, "y": 80}, ...].
    #[arg(long)]
    pub seeds: PathBuf,
    #[command(flatten)]
    pub dic: DicFlags,
}

pub fn run_2d(a: &RunArgs, run: &mut Run) -> Result<(), CliError> {
    let (spec, base) = RoiSpec::load(a.roi.as_deref(), run)?;
    let seeds = load_seeds(&a.seeds, run)?;
    let reference = load_images(std::slice::from_ref(&a.reference), run)?.remove(0);
    let frames = load_images(&a.deformed, run)?;
    let opts = a.dic.options(a.dic.order())?;
    let grid = spec.grid(&base, reference.width(), reference.height(), a.dic.spacing)?;
    let results = run.stage("correlate", || rgdic_sequence(&reference, &frames, &grid, &seeds, &opts))?;
    for (k, r) in results.iter().enumerate() {
        let frac = r.field.valid_fraction();
        if frac < 0.9 {
            run.warn(format!("frame {}: only {:.1}% of ROI points are valid", k + 1, 100.0 * frac));
        }
        if r.anchor != 0 {
            run.warn(format!("frame {} was matched against frame {}", k + 1, r.anchor));
        }
        let path = run.output(&format!("frame_{:03}.csv", k + 1))?;
        write_displacement(&path, &r.field)?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct StrainArgs {
    /// Displacement CSV written by `dic2d run`.
    #[arg(long)]
    pub input: PathBuf,
    /// ROI JSON of the run; restores partition labels so windows do not
    /// straddle them.
    #[arg(long)]
    pub roi: Option<PathBuf>,
    /// Strain window radius, grid points.
    #[arg(long, default_value_t = DEFAULT_STRAIN_WINDOW)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = PaletteArg::Viridis)]
    pub palette: PaletteArg,
    /// Fixed color range lo,hi; default is each map's data range.
    #[arg(long, value_parser = parse_pair)]
    pub range: Option<(f64, f64)>,
    /// Pixels per grid point in the maps.
    #[arg(long, default_value_t = 4)]
    pub cell: usize,
}

pub fn strain_2d(a: &StrainArgs, run: &mut Run) -> Result<(), CliError> {
    let (spec, _) = RoiSpec::load(a.roi.as_deref(), run)?;
    run.input(&a.input)?;
    let disp = read_displacement(&a.input, a.roi.as_ref().map(|_| &spec))?;
    let s = run.stage("strain", || strain_field(&disp, a.window))?;
    let path = run.output("strain.csv")?;
    write_strain(&path, &s)?;
    if a.cell == 0 {
        return Err(CliError::validation("--cell must be at least 1"));
    }
    let opts = RenderOptions {
        palette: a.palette.into(),
        range: a.range,
        cell: a.cell,
        color_bar: true,
    };
    for (name, vals) in [("exx.png", &s.exx), ("eyy.png", &s.eyy), ("exy.png", &s.exy)] {
        save_map(run, name, vals, &s.valid, &s.grid, &opts)?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct StereoArgs {
    /// Calibration JSON: left/right intrinsics and the stereo pose {R, t}.
    #[arg(long)]
    pub calibration: PathBuf,
    /// Left images; the first is the reference state.
    #[arg(long, num_args = 1.., required = true)]
    pub left: Vec<PathBuf>,
    /// Right images, same count and order as --left.
    #[arg(long, num_args = 1.., required = true)]
    pub right: Vec<PathBuf>,
    #[arg(long)]
    pub roi: Option<PathBuf>,
    /// Seed JSON in left-image pixels.
    #[arg(long)]
    pub seeds: PathBuf,
    #[command(flatten)]
    pub dic: DicFlags,
}

pub fn run_3d(a: &StereoArgs, run: &mut Run) -> Result<(), CliError> {
    if a.left.len() != a.right.len() {
        return Err(CliError::validation(format!(
            "{} left images but {} right images",
            a.left.len(),
            a.right.len()
        )));
    }
    run.input(&a.calibration)?;
    let calib: CalibrationFile = read_json(&a.calibration)?;
    let rig = calib.to_rig()?;
    let (spec, base) = RoiSpec::load(a.roi.as_deref(), run)?;
    let seeds = load_seeds(&a.seeds, run)?;
    let left = load_images(&a.left, run)?;
    let right = load_images(&a.right, run)?;
    let grid = spec.grid(&base, left[0].width(), left[0].height(), a.dic.spacing)?;
    let stereo_opts = a.dic.options(ShapeOrder::Second)?;
    let temporal_opts = a.dic.options(a.dic.order())?;
    let corr = run.stage("correlate", || {
        track_stereo_sequence(&left[0], &right[0], &left[1..], &right[1..], &grid, &seeds, &stereo_opts, &temporal_opts)
    })?;
    let frames = run.stage("triangulate", || surface_kinematics(&corr, &rig))?;
    let g = &corr[0].grid;
    let reference = &frames[0];
    let ref_valid: Vec<bool> = reference.points.iter().map(Option::is_some).collect();
    for (k, f) in frames.iter().enumerate() {
        let rows = (0..g.len()).map(|i| match (f.points[i], f.displacement[i]) {
            (Some(p), Some(d)) => [p.x, p.y, p.z, d.x, d.y, d.z, f.zncc[i]]
                .iter()
                .map(|v| num(*v, 6))
                .collect(),
            _ => vec![String::new(); 7],
        });
        let path = run.output(&format!("points_{k:03}.csv"))?;
        write_rows(&path, &["x", "y", "z", "u", "v", "w", "zncc"], rows)?;
        if k == 0 {
            continue;
        }
        let valid: Vec<bool> = (0..g.len()).map(|i| ref_valid[i] && f.points[i].is_some()).collect();
        let tris = grid_triangles(g, &valid);
        let mut rows = Vec::with_capacity(tris.len());
        let mut degenerate = 0usize;
        for t in &tris {
            let pick = |pts: &[Option<Vector3<f64>>]| -> [Vector3<f64>; 3] {
                t.map(|i| pts[i].unwrap_or_else(Vector3::zeros))
            };
            match triangle_strain(&pick(&reference.points), &pick(&f.points)) {
                Ok(s) => {
                    let mut r: Vec<String> = t.iter().map(|i| i.to_string()).collect();
                    r.extend(
                        [s.principal_green[0], s.principal_green[1], s.max_shear, s.area_change]
                            .iter()
                            .map(|v| num(*v, 9)),
                    );
                    rows.push(r);
                }
                Err(_) => degenerate += 1,
            }
        }
        if degenerate > 0 {
            run.warn(format!("frame {k}: {degenerate} degenerate triangles skipped"));
        }
        let path = run.output(&format!("triangles_{k:03}.csv"))?;
        write_rows(&path, &["a", "b", "c", "E1", "E2", "max_shear", "area_change"], rows)?;
    }
    Ok(())
}

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use strainscope::dvc::{
    dvc_match, load_volume, vol_strain, volume_files, DvcOptions, VolCriterion, VolGrid, VolStrainMeasure,
    Volume,
};

use crate::fields::{num, write_rows};
use crate::run::{CliError, Run};

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CriterionArg {
    /// Sum of squared differences.
    Sscc,
    /// Zero-normalized cross-correlation.
    Nccc,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MeasureArg {
    Small,
    GreenLagrange,
}

#[derive(Args, Debug, Serialize)]
pub struct DvcArgs {
    /// Reference volume header JSON.
    #[arg(long)]
    pub reference: PathBuf,
    /// Deformed volume header JSON.
    #[arg(long)]
    pub deformed: PathBuf,
    /// Subvolume half-width, voxels; subvolumes are (2M+1)^3.
    #[arg(long, default_value_t = 8)]
    pub subset_m: usize,
    /// Lattice spacing, voxels.
    #[arg(long, default_value_t = 5)]
    pub spacing: usize,
    /// Integer search radius, voxels.
    #[arg(long, default_value_t = 4)]
    pub search_radius: usize,
    /// Convergence tolerance on the update, voxels.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Nccc)]
    pub criterion: CriterionArg,
    /// Strain fit radius, lattice steps.
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = MeasureArg::Small)]
    pub measure: MeasureArg,
}

fn load(path: &Path, run: &mut Run) -> Result<Volume, CliError> {
    run.input(path)?;
    for f in volume_files(path)? {
        run.input(&f)?;
    }
    Ok(load_volume(path)?)
}

pub fn run_dvc(a: &DvcArgs, run: &mut Run) -> Result<(), CliError> {
    if a.spacing == 0 {
        return Err(CliError::validation("--spacing must be at least 1"));
    }
    let reference = load(&a.reference, run)?;
    let deformed = load(&a.deformed, run)?;
    let opts = DvcOptions {
        criterion: match a.criterion {
            CriterionArg::Sscc => VolCriterion::Sscc,
            CriterionArg::Nccc => VolCriterion::Nccc,
        },
        search_radius: a.search_radius,
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let grid = VolGrid::fit(reference.dims(), a.subset_m, a.spacing, a.search_radius)?;
    let disp = run.stage("correlate", || dvc_match(&reference, &deformed, &grid, &opts))?;
    let n = grid.len();
    let failed = n - disp.valid_count();
    if failed > 0 {
        run.warn(format!("{failed} of {n} points failed to match"));
    }
    let rows = (0..n).map(|i| {
        let (x, y, z) = grid.point(i);
        let mut r = vec![x.to_string(), y.to_string(), z.to_string()];
        let ok = disp.valid[i];
        for v in [disp.u[i], disp.v[i], disp.w[i], disp.cost[i]] {
            r.push(if ok { num(v, 6) } else { String::new() });
        }
        r.push((ok as u8).to_string());
        r
    });
    let path = run.output("displacement.csv")?;
    write_rows(&path, &["x", "y", "z", "u", "v", "w", "cost", "valid"], rows)?;

    let measure = match a.measure {
        MeasureArg::Small => VolStrainMeasure::Small,
        MeasureArg::GreenLagrange => VolStrainMeasure::GreenLagrange,
    };
    let strain = match run.stage("strain", || vol_strain(&disp, a.window, measure)) {
        Ok(s) => s,
        Err(e) => {
            run.warn(format!("strain skipped: {e}"));
            return Ok(());
        }
    };
    let rows = (0..n).map(|i| {
        let (x, y, z) = grid.point(i);
        let mut r = vec![x.to_string(), y.to_string(), z.to_string()];
        let ok = strain.valid[i];
        let e = &strain.strain[i];
        for (p, q) in [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)] {
            r.push(if ok { num(e[(p, q)], 9) } else { String::new() });
        }
        r.push((ok as u8).to_string());
        r
    });
    let path = run.output("strain.csv")?;
    write_rows(&path, &["x", "y", "z", "exx", "eyy", "ezz", "exy", "exz", "eyz", "valid"], rows)?;
    Ok(())
}

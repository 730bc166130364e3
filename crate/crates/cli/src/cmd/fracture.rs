use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use strainscope::dic2d::{strain_field, DisplacementField, DEFAULT_STRAIN_WINDOW};
use strainscope::mechanics::{
    crack_map_threshold, ctod, efpz, j_integral, locate_crack_tip, max_principal, paris_fit,
    pseudo_displacement_field, sif_fit, Annulus, CrackLabel, CrackTip, JIntegralDomain,
    MaterialElastic, StressInput, ViscoModel, CRACK_MAP_EXX, CRACK_MAP_EYY, EFPZ_25C,
};
use strainscope::render::{Palette, RenderOptions};
use strainscope::StrainField;

use crate::fields::{parse_pair, read_displacement, save_map, RoiSpec};
use crate::run::{read_json, CliError, Run};

/// Material file: elastic constants plus an optional Prony-series model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaterialFile {
    #[serde(flatten)]
    pub elastic: MaterialElastic,
    #[serde(default)]
    pub visco: Option<ViscoModel>,
}

/// Displacement input shared by the fracture commands.
#[derive(Args, Debug, Serialize)]
pub struct FieldArgs {
    /// Displacement CSV(s) from `dic2d run`. Several files form a history;
    /// the last one is analyzed.
    #[arg(long, num_args = 1.., required = true)]
    pub displacement: Vec<PathBuf>,
    /// ROI JSON of the run, to restore partition labels (crack faces).
    #[arg(long)]
    pub roi: Option<PathBuf>,
}

impl FieldArgs {
    fn load(&self, run: &mut Run) -> Result<Vec<DisplacementField>, CliError> {
        let (spec, _) = RoiSpec::load(self.roi.as_deref(), run)?;
        let spec = self.roi.as_ref().map(|_| &spec);
        self.displacement
            .iter()
            .map(|p| {
                run.input(p)?;
                read_displacement(p, spec)
            })
            .collect()
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TipArgs {
    /// Crack direction ax,ay (from the faces towards the tip).
    #[arg(long, value_parser = parse_pair, default_value = "1,0")]
    pub axis: (f64, f64),
    /// Crack-tip position x,y in px; located from the field when omitted.
    #[arg(long, value_parser = parse_pair)]
    pub tip: Option<(f64, f64)>,
}

impl TipArgs {
    fn resolve(&self, disp: &DisplacementField, run: &mut Run) -> Result<CrackTip, CliError> {
        match self.tip {
            Some((x, y)) => Ok(CrackTip::new(x, y, self.axis)?),
            None => Ok(run.stage("locate_tip", || locate_crack_tip(disp, self.axis))?),
        }
    }
}

fn load_material(path: &Path, run: &mut Run) -> Result<MaterialFile, CliError> {
    run.input(path)?;
    let m: MaterialFile = read_json(path)?;
    m.elastic.validate()?;
    if let Some(v) = &m.visco {
        v.validate()?;
    }
    Ok(m)
}

/// Field to analyze and the material to analyze it with. With a
/// viscoelastic model and a time history the field becomes the pseudo
/// displacement, which is elastic with the reference modulus.
fn analysis_field(
    mut frames: Vec<DisplacementField>,
    mat: &MaterialFile,
    times: &[f64],
    run: &mut Run,
) -> Result<(DisplacementField, MaterialElastic), CliError> {
    match (&mat.visco, times.is_empty()) {
        (Some(v), false) => {
            let mut pseudo = run.stage("pseudo_displacement", || pseudo_displacement_field(&frames, v, times))?;
            let mut e = mat.elastic;
            e.e = v.e_ref;
            Ok((pseudo.pop().ok_or_else(|| CliError::validation("no displacement frames"))?, e))
        }
        (Some(_), true) => {
            run.warn("material has a viscoelastic model but no --times; using the elastic constants");
            Ok((frames.pop().unwrap(), mat.elastic))
        }
        (None, false) => Err(CliError::validation("--times needs a viscoelastic model in the material file")),
        (None, true) => Ok((frames.pop().unwrap(), mat.elastic)),
    }
}

#[derive(Serialize)]
struct TipReport {
    x: f64,
    y: f64,
    axis: (f64, f64),
    located: bool,
}

fn tip_report(tip: &CrackTip, a: &TipArgs) -> TipReport {
    TipReport {
        x: tip.x,
        y: tip.y,
        axis: tip.axis,
        located: a.tip.is_none(),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CtodArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub tip: TipArgs,
    /// Distance of the reference points from the crack line, px.
    #[arg(long, default_value_t = 5.0)]
    pub offset: f64,
}

pub fn run_ctod(a: &CtodArgs, run: &mut Run) -> Result<(), CliError> {
    let disp = a.field.load(run)?.pop().unwrap();
    let tip = a.tip.resolve(&disp, run)?;
    let result = run.stage("ctod", || ctod(&disp, &tip, a.offset))?;
    #[derive(Serialize)]
    struct Out {
        tip: TipReport,
        #[serde(flatten)]
        result: strainscope::mechanics::CtodResult,
    }
    run.write_json("ctod.json", &Out { tip: tip_report(&tip, &a.tip), result })?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct SifArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub tip: TipArgs,
    /// Material JSON: {"E": ..., "nu": ..., "plane": "stress"|"strain", "visco": {...}}.
    #[arg(long)]
    pub material: PathBuf,
    /// Times of the displacement files, for viscoelastic materials.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Fitting annulus inner radius, px. Default 5 grid spacings.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Fitting annulus outer radius, px. Default 20 grid spacings.
    #[arg(long)]
    pub r_max: Option<f64>,
}

pub fn run_sif(a: &SifArgs, run: &mut Run) -> Result<(), CliError> {
    let mat = load_material(&a.material, run)?;
    let frames = a.field.load(run)?;
    let (disp, elastic) = analysis_field(frames, &mat, &a.times, run)?;
    let tip = a.tip.resolve(&disp, run)?;
    let def = Annulus::for_spacing(disp.grid.spacing);
    let annulus = Annulus {
        r_min: a.r_min.unwrap_or(def.r_min),
        r_max: a.r_max.unwrap_or(def.r_max),
    };
    let fit = run.stage("sif_fit", || sif_fit(&disp, &tip, &elastic, annulus))?;
    #[derive(Serialize)]
    struct Out {
        tip: TipReport,
        annulus: Annulus,
        #[serde(flatten)]
        fit: strainscope::mechanics::SifFit,
    }
    run.write_json("sif.json", &Out { tip: tip_report(&tip, &a.tip), annulus, fit })?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct JintArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub tip: TipArgs,
    #[arg(long)]
    pub material: PathBuf,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Inner half-width of the square integration domain, px.
    #[arg(long)]
    pub inner: f64,
    /// Outer half-width of the square integration domain, px.
    #[arg(long)]
    pub outer: f64,
    /// Strain window radius, grid points.
    #[arg(long, default_value_t = DEFAULT_STRAIN_WINDOW)]
    pub window: usize,
}

pub fn run_jint(a: &JintArgs, run: &mut Run) -> Result<(), CliError> {
    let mat = load_material(&a.material, run)?;
    let frames = a.field.load(run)?;
    let (disp, elastic) = analysis_field(frames, &mat, &a.times, run)?;
    let tip = a.tip.resolve(&disp, run)?;
    let domain = JIntegralDomain::new(tip, a.inner, a.outer)?;
    let strain = run.stage("strain", || strain_field(&disp, a.window))?;
    let j = run.stage("j_integral", || j_integral(&disp, &strain, &StressInput::Elastic(elastic), &domain))?;
    #[derive(Serialize)]
    struct Out {
        tip: TipReport,
        inner: f64,
        outer: f64,
        j: f64,
    }
    run.write_json(
        "jint.json",
        &Out {
            tip: tip_report(&tip, &a.tip),
            inner: a.inner,
            outer: a.outer,
            j,
        },
    )?;
    Ok(())
}

fn strain_of(field: &FieldArgs, window: usize, run: &mut Run) -> Result<StrainField, CliError> {
    let disp = field.load(run)?.pop().unwrap();
    Ok(run.stage("strain", || strain_field(&disp, window))?)
}

fn overlay_opts(cell: usize) -> Result<RenderOptions, CliError> {
    if cell == 0 {
        return Err(CliError::validation("--cell must be at least 1"));
    }
    Ok(RenderOptions {
        cell,
        ..RenderOptions::default()
    })
}

#[derive(Args, Debug, Serialize)]
pub struct EfpzArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Maximum principal strain threshold, microstrain (3000 at 25 C, 1500 at -12 C).
    #[arg(long, default_value_t = EFPZ_25C)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_STRAIN_WINDOW)]
    pub window: usize,
    /// Pixels per grid point in the overlay.
    #[arg(long, default_value_t = 4)]
    pub cell: usize,
}

pub fn run_efpz(a: &EfpzArgs, run: &mut Run) -> Result<(), CliError> {
    let opts = overlay_opts(a.cell)?;
    let s = strain_of(&a.field, a.window, run)?;
    let zone = efpz(&s, a.threshold);
    let e1: Vec<f64> = (0..s.grid.len()).map(|i| max_principal(s.exx[i], s.exy[i], s.eyy[i])).collect();
    if zone.count > 0 {
        save_map(run, "efpz.png", &e1, &zone.mask, &s.grid, &opts)?;
    } else {
        run.warn("no point reaches the eFPZ threshold; overlay skipped");
    }
    #[derive(Serialize)]
    struct Out {
        threshold_microstrain: f64,
        count: usize,
        area: f64,
    }
    run.write_json(
        "efpz.json",
        &Out {
            threshold_microstrain: a.threshold,
            count: zone.count,
            area: zone.area,
        },
    )?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct CrackMapArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// e_xx threshold for vertical cracks, microstrain.
    #[arg(long, default_value_t = CRACK_MAP_EXX)]
    pub exx_threshold: f64,
    /// e_yy threshold for interfacial cracks, microstrain.
    #[arg(long, default_value_t = CRACK_MAP_EYY)]
    pub eyy_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_STRAIN_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = 4)]
    pub cell: usize,
}

pub fn run_crackmap(a: &CrackMapArgs, run: &mut Run) -> Result<(), CliError> {
    let mut opts = overlay_opts(a.cell)?;
    let s = strain_of(&a.field, a.window, run)?;
    let labels = crack_map_threshold(&s, a.exx_threshold, a.eyy_threshold);
    let code = |l: &CrackLabel| match l {
        CrackLabel::None => 0.0,
        CrackLabel::Vertical => 1.0,
        CrackLabel::Interfacial => 2.0,
        CrackLabel::Both => 3.0,
    };
    let values: Vec<f64> = labels.iter().map(code).collect();
    let mask: Vec<bool> = values.iter().map(|v| *v > 0.0).collect();
    let count = |c: f64| values.iter().filter(|v| **v == c).count();
    if mask.iter().any(|m| *m) {
        opts.palette = Palette::Jet;
        opts.range = Some((0.0, 3.0));
        save_map(run, "crackmap.png", &values, &mask, &s.grid, &opts)?;
    } else {
        run.warn("no point reaches a crack threshold; overlay skipped");
    }
    #[derive(Serialize)]
    struct Out {
        exx_threshold_microstrain: f64,
        eyy_threshold_microstrain: f64,
        vertical: usize,
        interfacial: usize,
        both: usize,
        labels: Vec<CrackLabel>,
    }
    run.write_json(
        "crackmap.json",
        &Out {
            exx_threshold_microstrain: a.exx_threshold,
            eyy_threshold_microstrain: a.eyy_threshold,
            vertical: count(1.0),
            interfacial: count(2.0),
            both: count(3.0),
            labels,
        },
    )?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ParisArgs {
    /// CSV with columns a (crack length), N (cycles), dK (SIF range).
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Deserialize)]
struct ParisRow {
    a: f64,
    #[serde(rename = "N")]
    n: f64,
    #[serde(rename = "dK")]
    dk: f64,
}

pub fn run_paris(a: &ParisArgs, run: &mut Run) -> Result<(), CliError> {
    run.input(&a.input)?;
    let bad = |e: csv::Error| CliError::validation(format!("{}: {e}", a.input.display()));
    let rows: Vec<ParisRow> = csv::Reader::from_path(&a.input)
        .map_err(bad)?
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(bad)?;
    let col = |f: fn(&ParisRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let fit = run.stage("paris_fit", || paris_fit(&col(|r| r.a), &col(|r| r.n), &col(|r| r.dk)))?;
    run.write_json("paris.json", &fit)?;
    Ok(())
}

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use strainscope::image::{load_image, save_mask_summary, save_png16, synth_deform, synth_deform_with_noise};
use strainscope::speckle::{
    gen_speckle, mean_granule_diameter, mig, optimal_distance, quality_report, select_subset_size,
    SetupGeometry, SpeckleParams,
};
use strainscope::{AnalyticWarp, GrayImage};

use crate::fields::parse_point;
use crate::run::{read_json, CliError, Run};

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    /// Image width, px.
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    /// Image height, px.
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    /// Area fraction covered by granules, 0..0.9.
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    /// Nominal granule radius, px (>= 1).
    #[arg(long, default_value_t = 2.0)]
    pub granule_radius: f64,
    /// Basecoat minus granule intensity, 0..1.
    #[arg(long, default_value_t = 0.7)]
    pub contrast: f64,
    /// Edge softening, px.
    #[arg(long, default_value_t = 0.7)]
    pub edge_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct PatternReport {
    width: usize,
    height: usize,
    mig: f64,
    mean_granule_diameter: Option<f64>,
}

pub fn gen(a: &GenArgs, run: &mut Run) -> Result<(), CliError> {
    let params = SpeckleParams {
        density: a.density,
        granule_radius: a.granule_radius,
        contrast: a.contrast,
        rng_seed: a.seed,
        edge_sigma: a.edge_sigma,
    };
    let img = run.stage("generate", || gen_speckle(&params, a.width, a.height))?;
    let out = run.output("speckle.png")?;
    save_png16(&img, &out)?;
    let report = PatternReport {
        width: a.width,
        height: a.height,
        mig: mig(&img),
        mean_granule_diameter: mean_granule_diameter(&img),
    };
    run.write_json("speckle.json", &report)?;
    Ok(())
}

fn default_probes(img: &GrayImage, probes: &[(usize, usize)]) -> Vec<(usize, usize)> {
    if probes.is_empty() {
        vec![(img.width() / 2, img.height() / 2)]
    } else {
        probes.to_vec()
    }
}

#[derive(Args, Debug, Serialize)]
pub struct QaArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// SSSIG probe position x,y in px; repeatable. Default: image center.
    #[arg(long = "probe", value_parser = parse_point)]
    pub probes: Vec<(usize, usize)>,
    /// Subset half-width for the SSSIG probes, px.
    #[arg(long, default_value_t = 15)]
    pub subset_m: usize,
}

pub fn qa(a: &QaArgs, run: &mut Run) -> Result<(), CliError> {
    run.input(&a.input)?;
    let img = load_image(&a.input)?;
    let probes = default_probes(&img, &a.probes);
    let report = run.stage("quality", || quality_report(&img, &probes, a.subset_m))?;
    if !report.pass_mig {
        run.warn(format!(
            "MIG {:.2} is below the quality gate {}",
            report.mig, report.mig_threshold
        ));
    }
    run.write_json("quality.json", &report)?;
    println!("{}", serde_json::to_string(&report).unwrap_or_default());
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct SubsetSizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "probe", value_parser = parse_point)]
    pub probes: Vec<(usize, usize)>,
    /// Required SSSIG in both directions, (gray levels)^2 on a 0..255 scale.
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub m_min: usize,
    #[arg(long, default_value_t = 30)]
    pub m_max: usize,
}

#[derive(Serialize)]
struct SubsetChoice {
    subset_m: usize,
    subset_size: usize,
    threshold: f64,
}

pub fn subset_size(a: &SubsetSizeArgs, run: &mut Run) -> Result<(), CliError> {
    run.input(&a.input)?;
    let img = load_image(&a.input)?;
    let probes = default_probes(&img, &a.probes);
    let m = run.stage("select", || select_subset_size(&img, &probes, a.threshold, a.m_min, a.m_max))?;
    let choice = SubsetChoice {
        subset_m: m,
        subset_size: 2 * m + 1,
        threshold: a.threshold,
    };
    run.write_json("subset.json", &choice)?;
    println!("{}", serde_json::to_string(&choice).unwrap_or_default());
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct DistanceArgs {
    /// Object extent to fit in the field of view, mm.
    #[arg(long)]
    pub object_dim: f64,
    /// Lens focal length, mm.
    #[arg(long)]
    pub focal_length: f64,
    /// Sensor size along the same axis, px.
    #[arg(long)]
    pub sensor_pixels: f64,
    /// Pixel pitch, mm.
    #[arg(long)]
    pub pixel_pitch: f64,
}

#[derive(Serialize)]
struct DistanceReport {
    geometry: SetupGeometry,
    /// Lens-to-object distance, mm.
    distance_mm: f64,
}

pub fn distance(a: &DistanceArgs, run: &mut Run) -> Result<(), CliError> {
    let geometry = SetupGeometry::new(a.object_dim, a.focal_length, a.sensor_pixels, a.pixel_pitch)?;
    let distance_mm = optimal_distance(&geometry)?;
    let report = DistanceReport { geometry, distance_mm };
    run.write_json("distance.json", &report)?;
    println!("{}", serde_json::to_string(&report).unwrap_or_default());
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct DeformArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Analytic warp JSON, e.g. {"kind": "translation", "u": 0.5, "v": 0}.
    #[arg(long)]
    pub warp: PathBuf,
    /// Gaussian intensity noise, standard deviation on the 0..1 scale.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn deform(a: &DeformArgs, run: &mut Run) -> Result<(), CliError> {
    run.input(&a.input)?;
    run.input(&a.warp)?;
    let img = load_image(&a.input)?;
    let warp: AnalyticWarp = read_json(&a.warp)?;
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(CliError::validation("--noise must be a non-negative number"));
    }
    let out = run.stage("warp", || {
        if a.noise > 0.0 {
            synth_deform_with_noise(&img, &warp, a.noise, a.seed)
        } else {
            synth_deform(&img, &warp)
        }
    })?;
    let path = run.output("deformed.png")?;
    save_png16(&out.image, &path)?;
    let mask = run.output("mask.json")?;
    let summary = save_mask_summary(&out.mask, &mask)?;
    if summary.invalid_pixels > 0 {
        run.warn(format!(
            "{} pixels map outside the source image and were set to 0.5",
            summary.invalid_pixels
        ));
    }
    Ok(())
}

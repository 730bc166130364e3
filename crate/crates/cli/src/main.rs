//! `strainscope` command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid input or options, 2 the analysis failed.
//! Errors go to stderr as one JSON object. Every run that gets as far as
//! knowing its output directory writes `manifest.json` there, including
//! failed runs. `DIC_WORKERS` sets the worker count (default: all cores);
//! results do not depend on it.

mod cmd;
mod fields;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use cmd::{dic, dvc, fracture, speckle};
use run::{CliError, Run};

#[derive(Parser, Debug, Serialize)]
#[command(name = "strainscope", version, about = "Digital image and volume correlation")]
struct Cli {
    /// Output directory; created when missing.
    #[arg(long, global = true, default_value = "strainscope-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Speckle pattern generation and quality checks.
    #[command(subcommand)]
    Speckle(SpeckleCmd),
    /// Camera setup planning.
    #[command(subcommand)]
    Setup(SetupCmd),
    /// Synthetic test images with known deformation.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// 2D image correlation.
    #[command(subcommand)]
    Dic2d(Dic2dCmd),
    /// Stereo (3D surface) image correlation.
    #[command(subcommand)]
    Dic3d(Dic3dCmd),
    /// Fracture post-processing of displacement fields.
    #[command(subcommand)]
    Fracture(FractureCmd),
    /// Digital volume correlation.
    #[command(subcommand)]
    Dvc(DvcCmd),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum SpeckleCmd {
    /// Generate a speckle pattern (16-bit PNG).
    Gen(speckle::GenArgs),
    /// MIG quality gate and SSSIG at probe points.
    Qa(speckle::QaArgs),
    /// Smallest subset meeting an SSSIG threshold.
    SubsetSize(speckle::SubsetSizeArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum SetupCmd {
    /// Lens-to-object distance that fills the sensor with the object.
    Distance(speckle::DistanceArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum SynthCmd {
    /// Warp an image by an analytic displacement field.
    Deform(speckle::DeformArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Dic2dCmd {
    /// Reliability-guided correlation of one or more deformed images.
    Run(dic::RunArgs),
    /// Green-Lagrange strain and false-color maps from a displacement CSV.
    Strain(dic::StrainArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Dic3dCmd {
    /// Stereo matching, tracking, triangulation and triangle strain.
    Run(dic::StereoArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum FractureCmd {
    /// Crack-tip opening displacement.
    Ctod(fracture::CtodArgs),
    /// Mode-I stress intensity factor by field fitting.
    Sif(fracture::SifArgs),
    /// Domain J-integral.
    Jint(fracture::JintArgs),
    /// Effective fracture process zone from a strain threshold.
    Efpz(fracture::EfpzArgs),
    /// Vertical/interfacial crack map from strain thresholds.
    Crackmap(fracture::CrackMapArgs),
    /// Paris-law fit to crack growth data.
    Paris(fracture::ParisArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum DvcCmd {
    /// Subvolume matching on a regular lattice, plus strain.
    Run(dvc::DvcArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Speckle(SpeckleCmd::Gen(_)) => "speckle gen",
            Command::Speckle(SpeckleCmd::Qa(_)) => "speckle qa",
            Command::Speckle(SpeckleCmd::SubsetSize(_)) => "speckle subset-size",
            Command::Setup(SetupCmd::Distance(_)) => "setup distance",
            Command::Synth(SynthCmd::Deform(_)) => "synth deform",
            Command::Dic2d(Dic2dCmd::Run(_)) => "dic2d run",
            Command::Dic2d(Dic2dCmd::Strain(_)) => "dic2d strain",
            Command::Dic3d(Dic3dCmd::Run(_)) => "dic3d run",
            Command::Fracture(FractureCmd::Ctod(_)) => "fracture ctod",
            Command::Fracture(FractureCmd::Sif(_)) => "fracture sif",
            Command::Fracture(FractureCmd::Jint(_)) => "fracture jint",
            Command::Fracture(FractureCmd::Efpz(_)) => "fracture efpz",
            Command::Fracture(FractureCmd::Crackmap(_)) => "fracture crackmap",
            Command::Fracture(FractureCmd::Paris(_)) => "fracture paris",
            Command::Dvc(DvcCmd::Run(_)) => "dvc run",
        }
    }

    fn dispatch(&self, run: &mut Run) -> Result<(), CliError> {
        match self {
            Command::Speckle(SpeckleCmd::Gen(a)) => speckle::gen(a, run),
            Command::Speckle(SpeckleCmd::Qa(a)) => speckle::qa(a, run),
            Command::Speckle(SpeckleCmd::SubsetSize(a)) => speckle::subset_size(a, run),
            Command::Setup(SetupCmd::Distance(a)) => speckle::distance(a, run),
            Command::Synth(SynthCmd::Deform(a)) => speckle::deform(a, run),
            Command::Dic2d(Dic2dCmd::Run(a)) => dic::run_2d(a, run),
            Command::Dic2d(Dic2dCmd::Strain(a)) => dic::strain_2d(a, run),
            Command::Dic3d(Dic3dCmd::Run(a)) => dic::run_3d(a, run),
            Command::Fracture(FractureCmd::Ctod(a)) => fracture::run_ctod(a, run),
            Command::Fracture(FractureCmd::Sif(a)) => fracture::run_sif(a, run),
            Command::Fracture(FractureCmd::Jint(a)) => fracture::run_jint(a, run),
            Command::Fracture(FractureCmd::Efpz(a)) => fracture::run_efpz(a, run),
            Command::Fracture(FractureCmd::Crackmap(a)) => fracture::run_crackmap(a, run),
            Command::Fracture(FractureCmd::Paris(a)) => fracture::run_paris(a, run),
            Command::Dvc(DvcCmd::Run(a)) => dvc::run_dvc(a, run),
        }
    }
}

fn report(e: &CliError) -> ExitCode {
    let msg = serde_json::json!({ "error": e });
    eprintln!("{msg}");
    ExitCode::from(e.exit_code() as u8)
}

fn workers() -> Result<usize, CliError> {
    match std::env::var("DIC_WORKERS") {
        Err(_) => Ok(0),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::validation(format!("DIC_WORKERS must be a non-negative integer, got '{s}'"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return report(&CliError::validation(e.kind().to_string()));
        }
    };
    let config = serde_json::to_value(&cli).unwrap_or(serde_json::Value::Null);
    let workers = match workers() {
        Ok(w) => w,
        Err(e) => return report(&e),
    };
    let mut run = Run::new(&cli.out, cli.command.name().to_string(), config, workers);
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        strainscope::with_workers(workers, || cli.command.dispatch(&mut run))
    }))
    .unwrap_or_else(|_| Err(CliError::analysis("internal error")));
    let written = run.finish(&result);
    match (result, written) {
        (Err(e), _) | (Ok(()), Err(e)) => report(&e),
        (Ok(()), Ok(())) => ExitCode::SUCCESS,
    }
}

//! Run context: error classes, input hashing, output guarding and the run
//! manifest written next to every set of outputs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use strainscope::dic2d::DicError;
use strainscope::dvc::DvcError;
use strainscope::image::ImageError;
use strainscope::mechanics::MechError;
use strainscope::render::RenderError;
use strainscope::speckle::SpeckleError;
use strainscope::stereo::StereoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad input, option or configuration. Exit code 1.
    Validation,
    /// The analysis itself failed. Exit code 2.
    Analysis,
}

#[derive(Clone, Debug, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn analysis(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Analysis,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Analysis => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn classify(validation: bool, msg: String) -> CliError {
    if validation {
        CliError::validation(msg)
    } else {
        CliError::analysis(msg)
    }
}

impl From<DicError> for CliError {
    fn from(e: DicError) -> Self {
        use DicError::*;
        let v = matches!(
            e,
            SubsetOutOfBounds { .. }
                | SeedOutsideRoi { .. }
                | PartitionWithoutSeed(_)
                | EmptyRoi
                | SizeMismatch(..)
                | InvalidOptions(_)
                | SearchWindowOutOfBounds { .. }
        );
        classify(v, e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        use ImageError::*;
        let v = matches!(
            e,
            TooSmall { .. }
                | SizeMismatch { .. }
                | InvalidIntensity { .. }
                | NonInvertibleWarp(_)
                | UnreadableFile { .. }
                | UnsupportedBitDepth(_)
        );
        classify(v, e.to_string())
    }
}

impl From<SpeckleError> for CliError {
    fn from(e: SpeckleError) -> Self {
        use SpeckleError::*;
        let v = matches!(e, InvalidParams(_) | SubsetOutOfBounds { .. } | InvalidGeometry(_));
        classify(v, e.to_string())
    }
}

impl From<StereoError> for CliError {
    fn from(e: StereoError) -> Self {
        match e {
            StereoError::Dic(d) => d.into(),
            StereoError::InvalidCamera(_) | StereoError::InconsistentFrames(_) => {
                CliError::validation(e.to_string())
            }
            _ => CliError::analysis(e.to_string()),
        }
    }
}

impl From<MechError> for CliError {
    fn from(e: MechError) -> Self {
        use MechError::*;
        let v = matches!(e, Invalid(_) | MismatchedSeries(..) | NonMonotonicTime);
        classify(v, e.to_string())
    }
}

impl From<DvcError> for CliError {
    fn from(e: DvcError) -> Self {
        use DvcError::*;
        let v = matches!(
            e,
            InvalidVolume(_) | InvalidOptions(_) | Io(_) | SubvolumeOutOfBounds(..)
        );
        classify(v, e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        CliError::analysis(e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub workers: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<PathBuf>,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub status: &'static str,
    pub error: Option<CliError>,
}

pub struct Run {
    out_dir: PathBuf,
    inputs_canon: Vec<PathBuf>,
    pub manifest: RunManifest,
}

impl Run {
    pub fn new(out_dir: &Path, command: String, config: serde_json::Value, workers: usize) -> Self {
        Self {
            out_dir: out_dir.to_path_buf(),
            inputs_canon: Vec::new(),
            manifest: RunManifest {
                tool: "strainscope",
                version: env!("CARGO_PKG_VERSION"),
                command,
                workers,
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                stages: Vec::new(),
                warnings: Vec::new(),
                status: "ok",
                error: None,
            },
        }
    }

    /// Hashes an input file and remembers it so no output can replace it.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        if let Ok(c) = path.canonicalize() {
            self.inputs_canon.push(c);
        }
        self.manifest.inputs.push(InputRecord {
            path: path.to_path_buf(),
            sha256,
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Path for a new output file inside the output directory.
    pub fn output(&mut self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| {
            CliError::validation(format!("cannot create {}: {e}", self.out_dir.display()))
        })?;
        let path = self.out_dir.join(name);
        let canon = self
            .out_dir
            .canonicalize()
            .map(|d| d.join(name))
            .unwrap_or_else(|_| path.clone());
        if self.inputs_canon.contains(&canon) {
            return Err(CliError::validation(format!(
                "output {} would overwrite an input",
                path.display()
            )));
        }
        self.manifest.outputs.push(path.clone());
        Ok(path)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.manifest.warnings.push(msg.into());
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        self.manifest.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        r
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.output(name)?;
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::analysis(format!("cannot serialize {name}: {e}")))?;
        write_text(&path, &(text + "\n"))?;
        Ok(path)
    }

    /// Writes `manifest.json`; never replaces an input file.
    pub fn finish(mut self, result: &Result<(), CliError>) -> Result<(), CliError> {
        if let Err(e) = result {
            self.manifest.status = "error";
            self.manifest.error = Some(e.clone());
        }
        let path = self.output("manifest.json")?;
        self.manifest.outputs.pop();
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::analysis(format!("cannot serialize manifest: {e}")))?;
        write_text(&path, &(text + "\n"))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::analysis(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

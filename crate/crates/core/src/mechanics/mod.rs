//! Fracture and viscoelastic post-processing of measured fields.
//!
//! Lengths are in the units of the field grid (normally pixels) unless the
//! caller rescales the fields first. Strain thresholds are in microstrain.

mod crack;
mod jint;
mod maps;
mod paris;
mod sif;
mod visco;
pub mod williams;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crack::{ctod, locate_crack_tip, CtodResult};
pub use jint::{j_integral, JIntegralDomain, StressInput};
pub use maps::{
    crack_map_threshold, efpz, max_principal, CrackLabel, EfpzResult, CRACK_MAP_EXX, CRACK_MAP_EYY,
    EFPZ_25C, EFPZ_MINUS_12C,
};
pub use paris::{paris_fit, ParisFit};
pub use sif::{sif_fit, Annulus, SifFit};
pub use visco::{
    pseudo_displacement, pseudo_displacement_field, relax_modulus, strain_energy_density,
    visco_stress, PronyTerm, ViscoModel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechError {
    #[error("time samples must be strictly increasing")]
    NonMonotonicTime,
    #[error("series lengths differ ({0} vs {1})")]
    MismatchedSeries(usize, usize),
    #[error("no opening discontinuity found along the crack axis")]
    NoDiscontinuityFound,
    #[error("opening never reaches a plateau behind the tip")]
    NoPlateau,
    #[error("least-squares system is rank deficient")]
    RankDeficient,
    #[error("only {0} valid points in the fitting region, need at least {1}")]
    TooFewPoints(usize, usize),
    #[error("{0} points inside the integration domain are invalid")]
    DomainIntersectsInvalidPoints(usize),
    #[error("fewer than 3 positive crack growth rates")]
    NonPositiveRate,
    #[error("stress intensity amplitudes must be positive")]
    NonPositiveDeltaK,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneCondition {
    Stress,
    Strain,
}

/// Isotropic linear elastic constants. The shear modulus follows from `e`
/// and `nu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialElastic {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
    pub plane: PlaneCondition,
}

impl MaterialElastic {
    pub fn new(e: f64, nu: f64, plane: PlaneCondition) -> Result<Self, MechError> {
        let m = Self { e, nu, plane };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MechError> {
        if !(self.e > 0.0 && self.e.is_finite()) {
            return Err(MechError::Invalid(format!("Young's modulus {}", self.e)));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(MechError::Invalid(format!("Poisson ratio {}", self.nu)));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    pub fn kappa(&self) -> f64 {
        match self.plane {
            PlaneCondition::Strain => 3.0 - 4.0 * self.nu,
            PlaneCondition::Stress => (3.0 - self.nu) / (1.0 + self.nu),
        }
    }

    /// In-plane stress `(sxx, syy, sxy)` from tensor strain `(exx, eyy, exy)`.
    pub fn stress(&self, eps: [f64; 3]) -> [f64; 3] {
        let (e, nu) = (self.e, self.nu);
        let [exx, eyy, exy] = eps;
        let (a, b) = match self.plane {
            PlaneCondition::Strain => {
                let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
                (c * (1.0 - nu), c * nu)
            }
            PlaneCondition::Stress => {
                let c = e / (1.0 - nu * nu);
                (c, c * nu)
            }
        };
        [a * exx + b * eyy, b * exx + a * eyy, 2.0 * self.mu() * exy]
    }
}

/// Crack tip position and unit direction of crack growth (from the notch
/// toward the uncracked ligament).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrackTip {
    pub x: f64,
    pub y: f64,
    pub axis: (f64, f64),
}

impl CrackTip {
    pub fn new(x: f64, y: f64, axis: (f64, f64)) -> Result<Self, MechError> {
        let n = axis.0.hypot(axis.1);
        if !(n > 0.0 && n.is_finite()) {
            return Err(MechError::Invalid("crack axis must be a nonzero vector".into()));
        }
        Ok(Self {
            x,
            y,
            axis: (axis.0 / n, axis.1 / n),
        })
    }

    /// Crack-frame coordinates: along the axis and along its left normal.
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.x, y - self.y);
        let (a, b) = self.axis;
        (a * dx + b * dy, -b * dx + a * dy)
    }

    pub fn to_global(&self, s: f64, n: f64) -> (f64, f64) {
        let (a, b) = self.axis;
        (self.x + a * s - b * n, self.y + b * s + a * n)
    }

    /// Rotates an image-frame vector into the crack frame.
    pub fn rotate_in(&self, vx: f64, vy: f64) -> (f64, f64) {
        let (a, b) = self.axis;
        (a * vx + b * vy, -b * vx + a * vy)
    }
}

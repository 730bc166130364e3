use serde::{Deserialize, Serialize};

use super::shape::{warp_point, DeformVector, SubsetSpec};
use super::DicError;
use crate::image::{GrayImage, Interpolator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Ssd,
    Znssd,
    Cc,
    Zncc,
}

pub(crate) fn reference_values(img: &GrayImage, subset: &SubsetSpec) -> Result<Vec<f64>, DicError> {
    subset.check(img.width(), img.height())?;
    Ok(subset
        .offsets()
        .map(|(dx, dy)| {
            img.get(
                (subset.x as i64 + dx) as usize,
                (subset.y as i64 + dy) as usize,
            )
        })
        .collect())
}

pub(crate) fn warped_values(
    def: &Interpolator,
    subset: &SubsetSpec,
    p: &DeformVector,
) -> Result<Vec<f64>, DicError> {
    subset
        .offsets()
        .map(|(dx, dy)| {
            let (x, y) = warp_point(p, subset, dx as f64, dy as f64);
            def.value(x, y).map_err(|_| DicError::WarpOutOfDomain)
        })
        .collect()
}

/// Mean and root sum of squares of the zero-mean values.
pub(crate) fn zero_normalize(v: &mut [f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut ss = 0.0;
    for x in v.iter_mut() {
        *x -= mean;
        ss += *x * *x;
    }
    ss.sqrt()
}

fn has_variance(norm: f64, n: usize) -> bool {
    norm > 1e-12 * (n as f64).sqrt()
}

/// Zero-normalized SSD between two value sets of equal length.
pub(crate) fn znssd_of(f: &[f64], g: &[f64]) -> Result<f64, DicError> {
    let (mut f, mut g) = (f.to_vec(), g.to_vec());
    let (nf, ng) = (zero_normalize(&mut f), zero_normalize(&mut g));
    if !has_variance(nf, f.len()) || !has_variance(ng, g.len()) {
        return Err(DicError::ZeroVarianceSubset);
    }
    Ok(f.iter()
        .zip(&g)
        .map(|(a, b)| (a / nf - b / ng).powi(2))
        .sum())
}

/// Correlation criterion between the reference subset and its warped image
/// in `def` under shape `p`.
pub fn cost(
    reference: &GrayImage,
    def: &Interpolator,
    subset: &SubsetSpec,
    p: &DeformVector,
    criterion: Criterion,
) -> Result<f64, DicError> {
    let f = reference_values(reference, subset)?;
    let g = warped_values(def, subset, p)?;
    match criterion {
        Criterion::Ssd => Ok(f.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum()),
        Criterion::Cc => Ok(f.iter().zip(&g).map(|(a, b)| a * b).sum()),
        Criterion::Znssd => znssd_of(&f, &g),
        Criterion::Zncc => {
            let (mut f, mut g) = (f, g);
            let (nf, ng) = (zero_normalize(&mut f), zero_normalize(&mut g));
            if !has_variance(nf, f.len()) || !has_variance(ng, g.len()) {
                return Err(DicError::ZeroVarianceSubset);
            }
            let cross: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
            Ok(cross / (nf * ng))
        }
    }
}

/// Converts a ZNSSD cost to the equivalent ZNCC coefficient.
pub fn zncc_from_znssd(c: f64) -> Result<f64, DicError> {
    if !(0.0..=4.0).contains(&c) {
        return Err(DicError::OutOfRange(c));
    }
    Ok(1.0 - 0.5 * c)
}

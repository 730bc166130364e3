use serde::{Deserialize, Serialize};

use super::SpeckleError;
use crate::image::{gradients, GradientField, GrayImage};

/// Full-scale value of the 8-bit gray-level scale that SSSIG and MIG are
/// reported in.
pub const GRAY_LEVELS: f64 = 255.0;
/// Minimum acceptable mean intensity gradient, in 8-bit gray levels/pixel.
pub const MIG_THRESHOLD: f64 = 25.0;

fn check_subset(
    width: usize,
    height: usize,
    cx: usize,
    cy: usize,
    m: usize,
) -> Result<(), SpeckleError> {
    if cx < m || cy < m || cx + m >= width || cy + m >= height {
        return Err(SpeckleError::SubsetOutOfBounds {
            x: cx,
            y: cy,
            m,
            width,
            height,
        });
    }
    Ok(())
}

/// Sum of squared subset intensity gradients over the `(2m+1)^2` subset at
/// `(cx, cy)`, per direction, in squared gray levels.
pub fn sssig_from_gradients(
    grad: &GradientField,
    cx: usize,
    cy: usize,
    m: usize,
) -> Result<(f64, f64), SpeckleError> {
    check_subset(grad.width(), grad.height(), cx, cy, m)?;
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in cy - m..=cy + m {
        for x in cx - m..=cx + m {
            let (gx, gy) = grad.at(x, y);
            sx += gx * gx;
            sy += gy * gy;
        }
    }
    let scale = GRAY_LEVELS * GRAY_LEVELS;
    Ok((sx * scale, sy * scale))
}

pub fn sssig(img: &GrayImage, cx: usize, cy: usize, m: usize) -> Result<(f64, f64), SpeckleError> {
    check_subset(img.width(), img.height(), cx, cy, m)?;
    sssig_from_gradients(&gradients(img), cx, cy, m)
}

/// Mean intensity gradient magnitude over all pixels, in gray levels/pixel.
pub fn mig(img: &GrayImage) -> f64 {
    let g = gradients(img);
    let sum: f64 = g.fx.iter().zip(&g.fy).map(|(a, b)| a.hypot(*b)).sum();
    GRAY_LEVELS * sum / g.fx.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSssig {
    pub x: usize,
    pub y: usize,
    pub sssig_x: f64,
    pub sssig_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mig: f64,
    pub mig_threshold: f64,
    pub pass_mig: bool,
    pub subset_m: usize,
    pub probes: Vec<ProbeSssig>,
}

pub fn quality_report(
    img: &GrayImage,
    probes: &[(usize, usize)],
    m: usize,
) -> Result<QualityReport, SpeckleError> {
    let grad = gradients(img);
    let probes = probes
        .iter()
        .map(|&(x, y)| {
            let (sx, sy) = sssig_from_gradients(&grad, x, y, m)?;
            Ok(ProbeSssig {
                x,
                y,
                sssig_x: sx,
                sssig_y: sy,
            })
        })
        .collect::<Result<Vec<_>, SpeckleError>>()?;
    let mig = mig(img);
    Ok(QualityReport {
        mig,
        mig_threshold: MIG_THRESHOLD,
        pass_mig: mig >= MIG_THRESHOLD,
        subset_m: m,
        probes,
    })
}

/// Smallest half-width `m` in `[m_min, m_max]` for which every probe reaches
/// `threshold` in both directions.
///
/// There is no universal threshold; it follows from the displacement
/// accuracy required and the image noise level, so it is a caller input.
pub fn select_subset_size(
    img: &GrayImage,
    probes: &[(usize, usize)],
    threshold: f64,
    m_min: usize,
    m_max: usize,
) -> Result<usize, SpeckleError> {
    if m_min > m_max || probes.is_empty() {
        return Err(SpeckleError::InvalidParams(format!(
            "need m_min <= m_max and at least one probe (got {m_min}..{m_max}, {} probes)",
            probes.len()
        )));
    }
    for &(x, y) in probes {
        check_subset(img.width(), img.height(), x, y, m_max)?;
    }
    let grad = gradients(img);
    for m in m_min..=m_max {
        let mut worst = f64::INFINITY;
        for &(x, y) in probes {
            let (sx, sy) = sssig_from_gradients(&grad, x, y, m)?;
            worst = worst.min(sx.min(sy));
        }
        if worst >= threshold {
            return Ok(m);
        }
    }
    Err(SpeckleError::NoAdequateSubset {
        threshold,
        m_min,
        m_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speckle::{gen_speckle, SpeckleParams};
    use proptest::prelude::*;

    fn gray_ramp(w: usize, h: usize) -> GrayImage {
        // one gray level per pixel along x
        GrayImage::from_fn(w, h, |x, _| x as f64 / GRAY_LEVELS).unwrap()
    }

    #[test]
    fn constant_subset_has_zero_sssig() {
        let img = GrayImage::filled(40, 40, 0.4).unwrap();
        assert_eq!(sssig(&img, 20, 20, 7).unwrap(), (0.0, 0.0));
        assert_eq!(mig(&img), 0.0);
    }

    #[test]
    fn unit_gradient_ramp() {
        let img = gray_ramp(40, 30);
        let (sx, sy) = sssig(&img, 20, 15, 7).unwrap();
        assert!((sx - 225.0).abs() < 1e-9);
        assert_eq!(sy, 0.0);
        assert!((mig(&img) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speckle_sssig_matches_double_loop() {
        let img = gen_speckle(&SpeckleParams::default(), 64, 64).unwrap();
        let (sx, sy) = sssig(&img, 30, 33, 10).unwrap();
        let (mut bx, mut by) = (0.0, 0.0);
        for y in 23..=43 {
            for x in 20..=40 {
                let gx = (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0 * 255.0;
                let gy = (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0 * 255.0;
                bx += gx * gx;
                by += gy * gy;
            }
        }
        assert!((sx - bx).abs() <= 1e-12 * bx.max(1.0));
        assert!((sy - by).abs() <= 1e-12 * by.max(1.0));
    }

    #[test]
    fn out_of_bounds_subset_is_an_error() {
        let img = GrayImage::filled(20, 20, 0.4).unwrap();
        assert!(matches!(
            sssig(&img, 5, 10, 7),
            Err(SpeckleError::SubsetOutOfBounds { .. })
        ));
        assert!(sssig(&img, 10, 13, 7).is_err());
        assert!(sssig(&img, 10, 12, 7).is_ok());
    }

    #[test]
    fn default_pattern_passes_mig_gate() {
        let img = gen_speckle(&SpeckleParams::default(), 256, 256).unwrap();
        let report = quality_report(&img, &[(128, 128)], 10).unwrap();
        assert!(report.pass_mig, "MIG {}", report.mig);
        let flat = GrayImage::filled(64, 64, 0.5).unwrap();
        assert!(!quality_report(&flat, &[], 5).unwrap().pass_mig);
    }

    #[test]
    fn constant_image_has_no_adequate_subset() {
        let img = GrayImage::filled(64, 64, 0.5).unwrap();
        assert!(matches!(
            select_subset_size(&img, &[(32, 32)], 1.0, 3, 15),
            Err(SpeckleError::NoAdequateSubset { .. })
        ));
    }

    #[test]
    fn low_threshold_returns_minimum() {
        let img = gen_speckle(&SpeckleParams::default(), 96, 96).unwrap();
        let probes = [(30, 30), (60, 50), (48, 70)];
        let grad = gradients(&img);
        // scan oracle: the smallest admissible M has every probe above 1e3
        let all_pass = probes.iter().all(|&(x, y)| {
            let (a, b) = sssig_from_gradients(&grad, x, y, 4).unwrap();
            a.min(b) >= 1e3
        });
        assert!(all_pass);
        assert_eq!(select_subset_size(&img, &probes, 1e3, 4, 20).unwrap(), 4);
    }

    #[test]
    fn selected_size_is_minimal_on_random_patterns() {
        for seed in 0..20u64 {
            let p = SpeckleParams {
                rng_seed: seed,
                density: 0.15 + 0.02 * seed as f64,
                granule_radius: 2.5,
                ..Default::default()
            };
            let img = gen_speckle(&p, 80, 80).unwrap();
            let probes = [(25, 25), (55, 30), (40, 55)];
            let threshold = 2.0e5;
            let grad = gradients(&img);
            let passes = |m: usize| {
                probes.iter().all(|&(x, y)| {
                    let (a, b) = sssig_from_gradients(&grad, x, y, m).unwrap();
                    a.min(b) >= threshold
                })
            };
            let expect = (3..=20).find(|&m| passes(m));
            match (select_subset_size(&img, &probes, threshold, 3, 20), expect) {
                (Ok(m), Some(e)) => {
                    assert_eq!(m, e);
                    assert!(passes(m));
                    assert!(m == 3 || !passes(m - 1));
                }
                (Err(SpeckleError::NoAdequateSubset { .. }), None) => {}
                (got, want) => panic!("seed {seed}: {got:?} vs {want:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn sssig_grows_with_subset(seed in 0u64..200, m in 1usize..12) {
            let p = SpeckleParams { rng_seed: seed, ..Default::default() };
            let img = gen_speckle(&p, 40, 40).unwrap();
            let (a, b) = sssig(&img, 20, 20, m).unwrap();
            let (c, d) = sssig(&img, 20, 20, m + 1).unwrap();
            prop_assert!(c >= a && d >= b);
        }

        #[test]
        fn metrics_ignore_intensity_offset(seed in 0u64..200, offset in 0.0f64..0.09) {
            let p = SpeckleParams { rng_seed: seed, ..Default::default() };
            let img = gen_speckle(&p, 40, 40).unwrap();
            let shifted = img.affine_intensity(1.0, offset).unwrap();
            let (a, b) = sssig(&img, 20, 20, 8).unwrap();
            let (c, d) = sssig(&shifted, 20, 20, 8).unwrap();
            prop_assert!((a - c).abs() <= 1e-9 * a.max(1.0));
            prop_assert!((b - d).abs() <= 1e-9 * b.max(1.0));
            prop_assert!((mig(&img) - mig(&shifted)).abs() < 1e-9);
        }
    }
}

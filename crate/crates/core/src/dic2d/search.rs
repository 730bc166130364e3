use serde::{Deserialize, Serialize};

use super::cost::{reference_values, zero_normalize};
use super::shape::SubsetSpec;
use super::DicError;
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegerMatch {
    pub du: i64,
    pub dv: i64,
    pub zncc: f64,
}

/// Integer displacement maximizing ZNCC over the `(2 radius + 1)^2` shifts.
///
/// Shifts are scanned row by row; the first maximum wins ties.
pub fn integer_search(
    reference: &GrayImage,
    def: &GrayImage,
    subset: &SubsetSpec,
    radius: usize,
) -> Result<IntegerMatch, DicError> {
    let mut f = reference_values(reference, subset)?;
    let nf = zero_normalize(&mut f);
    if nf <= 1e-12 * (f.len() as f64).sqrt() {
        return Err(DicError::ZeroVarianceSubset);
    }
    let reach = subset.m + radius;
    if subset.x < reach
        || subset.y < reach
        || subset.x + reach >= def.width()
        || subset.y + reach >= def.height()
    {
        return Err(DicError::SearchWindowOutOfBounds {
            x: subset.x,
            y: subset.y,
            radius,
        });
    }
    let r = radius as i64;
    let mut best = IntegerMatch {
        du: 0,
        dv: 0,
        zncc: f64::NEG_INFINITY,
    };
    let mut g = vec![0.0; f.len()];
    for dv in -r..=r {
        for du in -r..=r {
            for (slot, (dx, dy)) in g.iter_mut().zip(subset.offsets()) {
                *slot = def.get(
                    (subset.x as i64 + du + dx) as usize,
                    (subset.y as i64 + dv + dy) as usize,
                );
            }
            let ng = zero_normalize(&mut g);
            let zncc = if ng > 1e-12 * (g.len() as f64).sqrt() {
                f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / (nf * ng)
            } else {
                0.0
            };
            if zncc > best.zncc {
                best = IntegerMatch { du, dv, zncc };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{synth_deform, AnalyticWarp};
    use crate::speckle::{gen_speckle, SpeckleParams};

    fn speckle() -> GrayImage {
        gen_speckle(&SpeckleParams::default(), 80, 80).unwrap()
    }

    #[test]
    fn identity_and_shift() {
        let img = speckle();
        let s = SubsetSpec::new(40, 40, 10);
        let m = integer_search(&img, &img, &s, 6).unwrap();
        assert_eq!((m.du, m.dv), (0, 0));
        assert!((m.zncc - 1.0).abs() < 1e-12);

        let shifted = synth_deform(&img, &AnalyticWarp::Translation { u: 5.0, v: -3.0 })
            .unwrap()
            .image;
        let m = integer_search(&img, &shifted, &s, 6).unwrap();
        assert_eq!((m.du, m.dv), (5, -3));
        assert!(m.zncc > 0.999);
    }

    #[test]
    fn out_of_basin_is_poorly_correlated() {
        let img = speckle();
        let shifted = synth_deform(&img, &AnalyticWarp::Translation { u: 8.0, v: 0.0 })
            .unwrap()
            .image;
        let m = integer_search(&img, &shifted, &SubsetSpec::new(40, 40, 10), 4).unwrap();
        assert!(m.zncc < 0.5, "zncc {}", m.zncc);
    }

    #[test]
    fn window_must_fit() {
        let img = speckle();
        assert!(matches!(
            integer_search(&img, &img, &SubsetSpec::new(15, 40, 10), 6),
            Err(DicError::SearchWindowOutOfBounds { .. })
        ));
    }
}

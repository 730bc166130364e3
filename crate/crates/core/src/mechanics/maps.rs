use serde::{Deserialize, Serialize};

use crate::dic2d::StrainField;

/// eFPZ strain threshold at 25 C, microstrain.
pub const EFPZ_25C: f64 = 3000.0;
/// eFPZ strain threshold at -12 C, microstrain.
pub const EFPZ_MINUS_12C: f64 = 1500.0;
/// Crack-map threshold on `e_xx` (vertical cracks), microstrain.
pub const CRACK_MAP_EXX: f64 = 9000.0;
/// Crack-map threshold on `e_yy` (interfacial cracks), microstrain.
pub const CRACK_MAP_EYY: f64 = 6000.0;

const MICRO: f64 = 1e-6;

pub fn max_principal(exx: f64, exy: f64, eyy: f64) -> f64 {
    0.5 * (exx + eyy) + (0.25 * (exx - eyy).powi(2) + exy * exy).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfpzResult {
    pub mask: Vec<bool>,
    pub count: usize,
    /// `count` times the grid cell area.
    pub area: f64,
}

/// Valid points whose maximum principal strain reaches `threshold`.
pub fn efpz(strain: &StrainField, threshold: f64) -> EfpzResult {
    let mask: Vec<bool> = (0..strain.grid.len())
        .map(|i| {
            strain.valid[i]
                && max_principal(strain.exx[i], strain.exy[i], strain.eyy[i]) >= threshold * MICRO
        })
        .collect();
    let count = mask.iter().filter(|m| **m).count();
    let h = strain.grid.spacing as f64;
    EfpzResult {
        mask,
        count,
        area: count as f64 * h * h,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrackLabel {
    None,
    /// `e_xx` above its threshold.
    Vertical,
    /// `e_yy` above its threshold.
    Interfacial,
    Both,
}

pub fn crack_map_threshold(strain: &StrainField, tx: f64, ty: f64) -> Vec<CrackLabel> {
    (0..strain.grid.len())
        .map(|i| {
            if !strain.valid[i] {
                return CrackLabel::None;
            }
            match (strain.exx[i] >= tx * MICRO, strain.eyy[i] >= ty * MICRO) {
                (true, true) => CrackLabel::Both,
                (true, false) => CrackLabel::Vertical,
                (false, true) => CrackLabel::Interfacial,
                (false, false) => CrackLabel::None,
            }
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dic2d::RoiGrid;
    use proptest::prelude::*;

    pub(crate) fn field(spacing: usize, f: impl Fn(f64, f64) -> (f64, f64, f64)) -> StrainField {
        let g = RoiGrid::rect(0, 0, 200, 200, spacing).unwrap();
        let n = g.len();
        let mut s = StrainField {
            grid: g,
            window_radius: 1,
            exx: vec![0.0; n],
            exy: vec![0.0; n],
            eyy: vec![0.0; n],
            ux: vec![0.0; n],
            uy: vec![0.0; n],
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            valid: vec![true; n],
        };
        for i in 0..n {
            let (x, y) = s.grid.point(i);
            let (a, b, c) = f(x as f64, y as f64);
            s.exx[i] = a;
            s.exy[i] = b;
            s.eyy[i] = c;
        }
        s
    }

    fn bump(x: f64, y: f64) -> (f64, f64, f64) {
        let r2 = (x - 100.0).powi(2) + (y - 90.0).powi(2);
        let e = 0.006 * (-r2 / (2.0 * 30.0f64.powi(2))).exp();
        (e, 0.0, 0.2 * e)
    }

    #[test]
    fn thresholds_and_trivial_fields() {
        assert_eq!((EFPZ_25C, EFPZ_MINUS_12C), (3000.0, 1500.0));
        assert_eq!((CRACK_MAP_EXX, CRACK_MAP_EYY), (9000.0, 6000.0));
        let zero = field(4, |_, _| (0.0, 0.0, 0.0));
        let r = efpz(&zero, EFPZ_25C);
        assert_eq!((r.count, r.area), (0, 0.0));
        assert!(crack_map_threshold(&zero, 9000.0, 6000.0).iter().all(|l| *l == CrackLabel::None));
        let mut hot = field(4, |_, _| (0.004, 0.0, 0.0));
        hot.valid[7] = false;
        let r = efpz(&hot, EFPZ_25C);
        assert_eq!(r.count, hot.grid.len() - 1);
        assert_eq!(r.area, r.count as f64 * 16.0);
    }

    #[test]
    fn gaussian_bump_area_matches_level_set() {
        let h = 2.0;
        let s = field(2, bump);
        let r = efpz(&s, EFPZ_25C);
        // e_max e^{-r^2/2s^2} >= t  <=>  r <= s sqrt(2 ln(e_max/t))
        let radius = 30.0 * (2.0 * (0.006f64 / 0.003).ln()).sqrt();
        let exact = std::f64::consts::PI * radius * radius;
        // one ring of cells around the boundary
        let ring = 2.0 * std::f64::consts::PI * radius * h;
        assert!((r.area - exact).abs() <= ring, "{} vs {exact}", r.area);
        for i in 0..s.grid.len() {
            let (x, y) = s.grid.point(i);
            let d = ((x as f64 - 100.0).powi(2) + (y as f64 - 90.0).powi(2)).sqrt();
            if d < radius - h {
                assert!(r.mask[i]);
            }
            if d > radius + h {
                assert!(!r.mask[i]);
            }
        }
    }

    #[test]
    fn vertical_band_is_flagged() {
        let s = field(2, |x, _| if (80.0..=100.0).contains(&x) { (0.012, 0.0, 0.001) } else { (0.001, 0.0, 0.0) });
        let m = crack_map_threshold(&s, CRACK_MAP_EXX, CRACK_MAP_EYY);
        for i in 0..s.grid.len() {
            let x = s.grid.point(i).0 as f64;
            let expect = if (80.0..=100.0).contains(&x) { CrackLabel::Vertical } else { CrackLabel::None };
            assert_eq!(m[i], expect);
        }
        let both = field(2, |_, _| (0.01, 0.0, 0.007));
        assert!(crack_map_threshold(&both, 9000.0, 6000.0).iter().all(|l| *l == CrackLabel::Both));
    }

    proptest! {
        #[test]
        fn area_is_monotone_in_threshold(t1 in 0.0f64..8000.0, t2 in 0.0f64..8000.0) {
            let s = field(5, bump);
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(efpz(&s, hi).area <= efpz(&s, lo).area);
        }
    }
}

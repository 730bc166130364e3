use serde::{Deserialize, Serialize};

use super::DicError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeOrder {
    First,
    Second,
}

impl ShapeOrder {
    /// Number of shape parameters.
    pub fn len(self) -> usize {
        match self {
            ShapeOrder::First => 6,
            ShapeOrder::Second => 12,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderTerms {
    pub uxx: f64,
    pub uyy: f64,
    pub uxy: f64,
    pub vxx: f64,
    pub vyy: f64,
    pub vxy: f64,
}

/// Subset shape parameters. The order is second exactly when `second` is set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeformVector {
    pub u: f64,
    pub v: f64,
    pub ux: f64,
    pub uy: f64,
    pub vx: f64,
    pub vy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<SecondOrderTerms>,
}

impl DeformVector {
    pub fn zero(order: ShapeOrder) -> Self {
        Self::translation(order, 0.0, 0.0)
    }

    pub fn translation(order: ShapeOrder, u: f64, v: f64) -> Self {
        Self {
            u,
            v,
            second: (order == ShapeOrder::Second).then(SecondOrderTerms::default),
            ..Default::default()
        }
    }

    pub fn order(&self) -> ShapeOrder {
        if self.second.is_some() {
            ShapeOrder::Second
        } else {
            ShapeOrder::First
        }
    }

    /// Same deformation expressed at another order; second-order terms are
    /// dropped or zero-filled.
    pub fn with_order(mut self, order: ShapeOrder) -> Self {
        self.second = match order {
            ShapeOrder::First => None,
            ShapeOrder::Second => Some(self.second.unwrap_or_default()),
        };
        self
    }

    /// Parameters as `[u, ux, uy, v, vx, vy, uxx, uyy, uxy, vxx, vyy, vxy]`,
    /// truncated to the order.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = vec![self.u, self.ux, self.uy, self.v, self.vx, self.vy];
        if let Some(s) = self.second {
            p.extend([s.uxx, s.uyy, s.uxy, s.vxx, s.vyy, s.vxy]);
        }
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        assert!(p.len() == 6 || p.len() == 12, "6 or 12 shape parameters");
        Self {
            u: p[0],
            ux: p[1],
            uy: p[2],
            v: p[3],
            vx: p[4],
            vy: p[5],
            second: (p.len() == 12).then(|| SecondOrderTerms {
                uxx: p[6],
                uyy: p[7],
                uxy: p[8],
                vxx: p[9],
                vyy: p[10],
                vxy: p[11],
            }),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_params().iter().all(|v| v.is_finite())
    }

    /// Displacement of the subset point at offset `(dx, dy)` from the center.
    #[inline]
    pub fn displacement(&self, dx: f64, dy: f64) -> (f64, f64) {
        let mut du = self.u + self.ux * dx + self.uy * dy;
        let mut dv = self.v + self.vx * dx + self.vy * dy;
        if let Some(s) = &self.second {
            let (xx, yy, xy) = (0.5 * dx * dx, 0.5 * dy * dy, dx * dy);
            du += s.uxx * xx + s.uyy * yy + s.uxy * xy;
            dv += s.vxx * xx + s.vyy * yy + s.vxy * xy;
        }
        (du, dv)
    }
}

/// Square `(2m+1)^2` subset centered on a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub x: usize,
    pub y: usize,
    pub m: usize,
}

impl SubsetSpec {
    pub fn new(x: usize, y: usize, m: usize) -> Self {
        Self { x, y, m }
    }

    /// True when the subset plus the 2-px interpolation margin is inside a
    /// `width x height` image.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        let r = self.m + 2;
        self.x >= r && self.y >= r && self.x + r < width && self.y + r < height
    }

    pub(crate) fn check(&self, width: usize, height: usize) -> Result<(), DicError> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(DicError::SubsetOutOfBounds {
                x: self.x,
                y: self.y,
                m: self.m,
            })
        }
    }

    pub fn size(&self) -> usize {
        (2 * self.m + 1) * (2 * self.m + 1)
    }

    /// Offsets `(dx, dy)` of every subset pixel in row-major order.
    pub(crate) fn offsets(&self) -> impl Iterator<Item = (i64, i64)> {
        let m = self.m as i64;
        (-m..=m).flat_map(move |dy| (-m..=m).map(move |dx| (dx, dy)))
    }
}

/// Position in the deformed image of the reference pixel at `(dx, dy)` from
/// the subset center.
pub fn warp_point(p: &DeformVector, subset: &SubsetSpec, dx: f64, dy: f64) -> (f64, f64) {
    let (du, dv) = p.displacement(dx, dy);
    (
        subset.x as f64 + dx + du,
        subset.y as f64 + dy + dv,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_identity() {
        let s = SubsetSpec::new(20, 30, 7);
        for order in [ShapeOrder::First, ShapeOrder::Second] {
            let p = DeformVector::zero(order);
            assert_eq!(warp_point(&p, &s, -3.0, 5.0), (17.0, 35.0));
        }
    }

    #[test]
    fn translation() {
        let s = SubsetSpec::new(20, 30, 7);
        let p = DeformVector::translation(ShapeOrder::First, 2.5, -1.0);
        assert_eq!(warp_point(&p, &s, 1.0, 2.0), (23.5, 31.0));
    }

    #[test]
    fn second_order_uxx() {
        let s = SubsetSpec::new(20, 30, 7);
        let mut p = DeformVector::zero(ShapeOrder::Second);
        p.second.as_mut().unwrap().uxx = 0.01;
        let (x, y) = warp_point(&p, &s, 4.0, 0.0);
        assert!((x - (20.0 + 4.0 + 0.5 * 0.01 * 16.0)).abs() < 1e-14);
        assert_eq!(y, 30.0);
    }

    #[test]
    fn params_round_trip() {
        let p = DeformVector::from_params(&[1., 2., 3., 4., 5., 6., 7., 8., 9., 10., 11., 12.]);
        assert_eq!(p.order(), ShapeOrder::Second);
        assert_eq!(DeformVector::from_params(&p.to_params()), p);
        assert_eq!(p.with_order(ShapeOrder::First).to_params(), vec![1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn containment() {
        let s = SubsetSpec::new(9, 9, 7);
        assert!(s.fits(19, 19));
        assert!(!s.fits(18, 19));
        assert!(!SubsetSpec::new(8, 9, 7).fits(40, 40));
    }
}

use serde::{Deserialize, Serialize};

use super::shape::{DeformVector, SubsetSpec};
use super::DicError;

/// Equidistant measurement grid over a rectangular ROI.
///
/// Point `(row, col)` sits at pixel `(x0 + col * spacing, y0 + row * spacing)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiGrid {
    pub x0: usize,
    pub y0: usize,
    pub spacing: usize,
    pub cols: usize,
    pub rows: usize,
    /// `true` where the point takes part in the analysis.
    pub mask: Vec<bool>,
    /// Partition label per point; 0 means unpartitioned.
    pub labels: Vec<i32>,
}

impl RoiGrid {
    /// Grid covering `[x0, x1] x [y0, y1]` (inclusive) at the given spacing.
    pub fn rect(x0: usize, y0: usize, x1: usize, y1: usize, spacing: usize) -> Result<Self, DicError> {
        if spacing == 0 || x1 < x0 || y1 < y0 {
            return Err(DicError::InvalidOptions(format!(
                "bad ROI rectangle ({x0}, {y0})-({x1}, {y1}) with spacing {spacing}"
            )));
        }
        let cols = (x1 - x0) / spacing + 1;
        let rows = (y1 - y0) / spacing + 1;
        Ok(Self {
            x0,
            y0,
            spacing,
            cols,
            rows,
            mask: vec![true; cols * rows],
            labels: vec![0; cols * rows],
        })
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn row_col(&self, i: usize) -> (usize, usize) {
        (i / self.cols, i % self.cols)
    }

    /// Pixel position of point `i`.
    #[inline]
    pub fn point(&self, i: usize) -> (usize, usize) {
        let (r, c) = self.row_col(i);
        (self.x0 + c * self.spacing, self.y0 + r * self.spacing)
    }

    /// Index of the grid point at pixel `(x, y)`, if there is one.
    pub fn index_of(&self, x: usize, y: usize) -> Option<usize> {
        if x < self.x0 || y < self.y0 {
            return None;
        }
        let (dx, dy) = (x - self.x0, y - self.y0);
        if dx % self.spacing != 0 || dy % self.spacing != 0 {
            return None;
        }
        let (c, r) = (dx / self.spacing, dy / self.spacing);
        (c < self.cols && r < self.rows).then(|| self.index(r, c))
    }

    /// Nearest grid point to pixel `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        let c = ((x - self.x0 as f64) / self.spacing as f64).round();
        let r = ((y - self.y0 as f64) / self.spacing as f64).round();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some(self.index(r as usize, c as usize))
    }

    /// Masks out points where `keep(x, y)` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(usize, usize) -> bool) {
        for i in 0..self.len() {
            let (x, y) = self.point(i);
            if !keep(x, y) {
                self.mask[i] = false;
            }
        }
    }

    /// Masks out points outside a closed polygon (even-odd rule).
    pub fn retain_polygon(&mut self, poly: &[(f64, f64)]) {
        self.retain(|x, y| point_in_polygon(x as f64, y as f64, poly));
    }

    pub fn set_labels(&mut self, mut label: impl FnMut(usize, usize) -> i32) {
        for i in 0..self.len() {
            let (x, y) = self.point(i);
            self.labels[i] = label(x, y);
        }
    }

    /// Masks out points whose `(2m+1)^2` subset plus interpolation margin
    /// does not fit a `width x height` image.
    pub fn fit_to_subsets(&mut self, m: usize, width: usize, height: usize) {
        for i in 0..self.len() {
            let (x, y) = self.point(i);
            if !SubsetSpec::new(x, y, m).fits(width, height) {
                self.mask[i] = false;
            }
        }
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// 4-neighbors of point `i` in the order up, left, right, down.
    pub(crate) fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.row_col(i);
        let up = (r > 0).then(|| i - self.cols);
        let left = (c > 0).then(|| i - 1);
        let right = (c + 1 < self.cols).then(|| i + 1);
        let down = (r + 1 < self.rows).then(|| i + self.cols);
        [up, left, right, down].into_iter().flatten()
    }
}

fn point_in_polygon(x: f64, y: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[(i + n - 1) % n];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
    }
    inside
}

/// Starting point for propagation. Without an initial guess the seed is
/// located by integer search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub x: usize,
    pub y: usize,
    #[serde(default)]
    pub initial_guess: Option<DeformVector>,
}

impl SeedPoint {
    pub fn at(x: usize, y: usize) -> Self {
        Self {
            x,
            y,
            initial_guess: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementField {
    pub grid: RoiGrid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub zncc: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DisplacementField {
    pub fn empty(grid: RoiGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            u: vec![f64::NAN; n],
            v: vec![f64::NAN; n],
            zncc: vec![f64::NAN; n],
            valid: vec![false; n],
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Valid points over unmasked grid points.
    pub fn valid_fraction(&self) -> f64 {
        let active = self.grid.active_count();
        if active == 0 {
            0.0
        } else {
            self.valid_count() as f64 / active as f64
        }
    }

    /// Bilinear interpolation of `(u, v, zncc)` at pixel `(x, y)`; `None`
    /// unless all surrounding grid points are valid.
    pub fn sample(&self, x: f64, y: f64) -> Option<(f64, f64, f64)> {
        let g = &self.grid;
        let fc = (x - g.x0 as f64) / g.spacing as f64;
        let fr = (y - g.y0 as f64) / g.spacing as f64;
        if !(fc >= 0.0 && fr >= 0.0 && fc <= (g.cols - 1) as f64 && fr <= (g.rows - 1) as f64) {
            return None;
        }
        let c0 = (fc.floor() as usize).min(g.cols.saturating_sub(2));
        let r0 = (fr.floor() as usize).min(g.rows.saturating_sub(2));
        let (c1, r1) = ((c0 + 1).min(g.cols - 1), (r0 + 1).min(g.rows - 1));
        let (tc, tr) = (fc - c0 as f64, fr - r0 as f64);
        let corners = [
            (g.index(r0, c0), (1.0 - tc) * (1.0 - tr)),
            (g.index(r0, c1), tc * (1.0 - tr)),
            (g.index(r1, c0), (1.0 - tc) * tr),
            (g.index(r1, c1), tc * tr),
        ];
        let mut out = (0.0, 0.0, 0.0);
        for (i, w) in corners {
            if w == 0.0 {
                continue;
            }
            if !self.valid[i] {
                return None;
            }
            out.0 += w * self.u[i];
            out.1 += w * self.v[i];
            out.2 += w * self.zncc[i];
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = RoiGrid::rect(10, 20, 50, 40, 10).unwrap();
        assert_eq!((g.cols, g.rows), (5, 3));
        assert_eq!(g.point(g.index(2, 4)), (50, 40));
        assert_eq!(g.index_of(30, 30), Some(g.index(1, 2)));
        assert_eq!(g.index_of(31, 30), None);
        assert_eq!(g.nearest(31.0, 26.0), Some(g.index(1, 2)));
        let nb: Vec<_> = g.neighbors(g.index(0, 0)).collect();
        assert_eq!(nb, vec![1, 5]);
        assert_eq!(g.neighbors(g.index(1, 2)).count(), 4);
    }

    #[test]
    fn masks() {
        let mut g = RoiGrid::rect(0, 0, 100, 100, 10).unwrap();
        g.fit_to_subsets(10, 101, 101);
        // 12..=88 survive: 20..80 in steps of 10
        assert_eq!(g.active_count(), 7 * 7);
        let mut p = RoiGrid::rect(0, 0, 100, 100, 10).unwrap();
        p.retain_polygon(&[(15.0, 15.0), (55.0, 15.0), (55.0, 55.0), (15.0, 55.0)]);
        assert_eq!(p.active_count(), 16);
    }

    #[test]
    fn bilinear_sampling_is_exact_on_planes() {
        let g = RoiGrid::rect(0, 0, 40, 40, 10).unwrap();
        let mut d = DisplacementField::empty(g);
        for i in 0..d.grid.len() {
            let (x, y) = d.grid.point(i);
            d.u[i] = 0.5 + 0.01 * x as f64;
            d.v[i] = -0.02 * y as f64;
            d.zncc[i] = 0.9;
            d.valid[i] = true;
        }
        let (u, v, _) = d.sample(17.5, 33.0).unwrap();
        assert!((u - (0.5 + 0.175)).abs() < 1e-14 && (v + 0.66).abs() < 1e-14);
        assert!(d.sample(40.0, 40.0).is_some());
        assert!(d.sample(40.5, 10.0).is_none());
        d.valid[d.grid.index(3, 1)] = false;
        assert!(d.sample(17.5, 33.0).is_none());
    }
}

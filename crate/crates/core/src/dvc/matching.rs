use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{trilinear, DvcError, Volume};
use crate::par::map_ordered;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolCriterion {
    /// Sum of squared differences; 0 is a perfect match.
    Sscc,
    /// Normalized (zero-mean) cross-correlation in [-1, 1]; 1 is perfect.
    Nccc,
}

/// Regular lattice of measurement points with cubic subvolumes of
/// half-width `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolGrid {
    pub origin: (usize, usize, usize),
    pub spacing: usize,
    pub counts: (usize, usize, usize),
    pub m: usize,
}

impl VolGrid {
    /// Largest lattice with the given spacing whose subvolumes plus a
    /// search margin `radius` stay inside `dims`.
    pub fn fit(dims: (usize, usize, usize), m: usize, spacing: usize, radius: usize) -> Result<Self, DvcError> {
        if spacing == 0 {
            return Err(DvcError::InvalidOptions("spacing must be >= 1".into()));
        }
        let pad = m + radius;
        let axis = |n: usize| -> Result<usize, DvcError> {
            if n < 2 * pad + 1 {
                return Err(DvcError::InvalidOptions(format!(
                    "volume extent {n} too small for half-width {m} plus search radius {radius}"
                )));
            }
            Ok((n - 1 - 2 * pad) / spacing + 1)
        };
        Ok(Self {
            origin: (pad, pad, pad),
            spacing,
            counts: (axis(dims.0)?, axis(dims.1)?, axis(dims.2)?),
            m,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.0 * self.counts.1 * self.counts.2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts.0 * (j + self.counts.1 * k)
    }

    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        let (a, b) = (self.counts.0, self.counts.1);
        (idx % a, (idx / a) % b, idx / (a * b))
    }

    pub fn point(&self, idx: usize) -> (usize, usize, usize) {
        let (i, j, k) = self.ijk(idx);
        let s = self.spacing;
        (self.origin.0 + i * s, self.origin.1 + j * s, self.origin.2 + k * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvcOptions {
    pub criterion: VolCriterion,
    pub search_radius: usize,
    /// Update-norm tolerance in voxels at the subvolume edge.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DvcOptions {
    fn default() -> Self {
        Self {
            criterion: VolCriterion::Nccc,
            search_radius: 4,
            tol: 1e-3,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolDisplacement {
    pub grid: VolGrid,
    pub criterion: VolCriterion,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub cost: Vec<f64>,
    pub valid: Vec<bool>,
}

impl VolDisplacement {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Central-difference gradient volumes (one-sided at the faces).
struct Gradients {
    g: [Volume; 3],
}

impl Gradients {
    fn new(vol: &Volume) -> Self {
        let (nx, ny, nz) = vol.dims();
        let diff = |axis: usize| {
            Volume::from_fn(nx, ny, nz, |x, y, z| {
                let p = [x, y, z];
                let n = [nx, ny, nz][axis];
                let (lo, hi) = (p[axis].saturating_sub(1), (p[axis] + 1).min(n - 1));
                let at = |c: usize| {
                    let mut q = p;
                    q[axis] = c;
                    vol.get(q[0], q[1], q[2])
                };
                (at(hi) - at(lo)) / (hi - lo) as f64
            })
            .expect("gradient of a valid volume is valid")
        };
        Self {
            g: [diff(0), diff(1), diff(2)],
        }
    }
}

fn offsets(m: usize) -> Vec<[f64; 3]> {
    let m = m as i64;
    let mut out = Vec::with_capacity(((2 * m + 1) as usize).pow(3));
    for dz in -m..=m {
        for dy in -m..=m {
            for dx in -m..=m {
                out.push([dx as f64, dy as f64, dz as f64]);
            }
        }
    }
    out
}

fn zero_normalize(v: &mut [f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut ss = 0.0;
    for x in v.iter_mut() {
        *x -= mean;
        ss += *x * *x;
    }
    ss.sqrt()
}

fn criterion_value(c: VolCriterion, f: &[f64], g: &[f64]) -> Option<f64> {
    match c {
        VolCriterion::Sscc => Some(f.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum()),
        VolCriterion::Nccc => {
            let (mut f, mut g) = (f.to_vec(), g.to_vec());
            let (nf, ng) = (zero_normalize(&mut f), zero_normalize(&mut g));
            if !(nf > 0.0 && ng > 0.0) {
                return None;
            }
            let c: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
            Some((c / (nf * ng)).clamp(-1.0, 1.0))
        }
    }
}

fn better(c: VolCriterion, a: f64, b: f64) -> bool {
    match c {
        VolCriterion::Sscc => a < b,
        VolCriterion::Nccc => a > b,
    }
}

/// Integer search followed by Gauss-Newton refinement of a first-order
/// (affine) shape function at one point. Returns `(displacement, cost)`.
pub fn dvc_match_point(
    reference: &Volume,
    def: &Volume,
    at: (usize, usize, usize),
    m: usize,
    opts: &DvcOptions,
) -> Result<([f64; 3], f64), DvcError> {
    dvc_match_inner(reference, def, &Gradients::new(def), at, m, opts)
}

fn dvc_match_inner(
    reference: &Volume,
    def: &Volume,
    grad: &Gradients,
    at: (usize, usize, usize),
    m: usize,
    opts: &DvcOptions,
) -> Result<([f64; 3], f64), DvcError> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(DvcError::InvalidOptions("tol and max_iter must be positive".into()));
    }
    let (x, y, z) = at;
    let pad = m + opts.search_radius;
    let fits = |p: usize, n: usize| p >= pad && p + pad < n;
    let (nx, ny, nz) = reference.dims();
    if def.dims() != reference.dims() || !(fits(x, nx) && fits(y, ny) && fits(z, nz)) {
        return Err(DvcError::SubvolumeOutOfBounds(x, y, z));
    }
    let offs = offsets(m);
    let np = offs.len();
    let f: Vec<f64> = offs
        .iter()
        .map(|o| reference.get((x as f64 + o[0]) as usize, (y as f64 + o[1]) as usize, (z as f64 + o[2]) as usize))
        .collect();
    let mut fz = f.clone();
    let nf = zero_normalize(&mut fz);
    if nf <= 1e-12 * (np as f64).sqrt() {
        return Err(DvcError::ZeroVarianceSubvolume);
    }

    // integer search, raster order, first extremum wins
    let r = opts.search_radius as i64;
    let mut best: Option<([i64; 3], f64)> = None;
    let mut g = vec![0.0; np];
    for dw in -r..=r {
        for dv in -r..=r {
            for du in -r..=r {
                for (gi, o) in g.iter_mut().zip(&offs) {
                    *gi = def.get(
                        (x as i64 + du + o[0] as i64) as usize,
                        (y as i64 + dv + o[1] as i64) as usize,
                        (z as i64 + dw + o[2] as i64) as usize,
                    );
                }
                if let Some(c) = criterion_value(opts.criterion, &f, &g) {
                    if best.is_none_or(|(_, b)| better(opts.criterion, c, b)) {
                        best = Some(([du, dv, dw], c));
                    }
                }
            }
        }
    }
    let (shift, _) = best.ok_or(DvcError::ZeroVarianceSubvolume)?;

    // p = [u, ux, uy, uz, v, vx, vy, vz, w, wx, wy, wz]; gradients scaled by m
    let mf = m.max(1) as f64;
    let mut p = [0.0; 12];
    for a in 0..3 {
        p[4 * a] = shift[a] as f64;
    }
    let warp = |p: &[f64; 12], o: &[f64; 3]| -> [f64; 3] {
        let c = [x as f64, y as f64, z as f64];
        let mut out = [0.0; 3];
        for a in 0..3 {
            let b = 4 * a;
            out[a] = c[a] + o[a] + p[b] + p[b + 1] * o[0] + p[b + 2] * o[1] + p[b + 3] * o[2];
        }
        out
    };
    let sample = |v: &Volume, q: [f64; 3]| trilinear(v, q[0], q[1], q[2]).map_err(|_| DvcError::Diverged);
    let mut jac = DMatrix::<f64>::zeros(np, 12);
    let zn = opts.criterion == VolCriterion::Nccc;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        for (i, o) in offs.iter().enumerate() {
            let q = warp(&p, o);
            g[i] = sample(def, q)?;
            let basis = [1.0, o[0] / mf, o[1] / mf, o[2] / mf];
            for a in 0..3 {
                let ga = sample(&grad.g[a], q)?;
                for (k, bk) in basis.iter().enumerate() {
                    jac[(i, 4 * a + k)] = ga * bk;
                }
            }
        }
        let resid = if zn {
            let ng = zero_normalize(&mut g);
            if ng <= 1e-12 * (np as f64).sqrt() {
                return Err(DvcError::Diverged);
            }
            let cross: f64 = fz.iter().zip(&g).map(|(a, b)| a * b).sum();
            let gg: f64 = g.iter().map(|b| b * b).sum();
            let s = if cross > 0.0 { gg / cross } else { ng / nf };
            for k in 0..12 {
                let mean = jac.column(k).sum() / np as f64;
                jac.column_mut(k).add_scalar_mut(-mean);
            }
            DVector::from_iterator(np, fz.iter().zip(&g).map(|(a, b)| s * a - b))
        } else {
            DVector::from_iterator(np, f.iter().zip(&g).map(|(a, b)| a - b))
        };
        let q = jac
            .tr_mul(&jac)
            .cholesky()
            .ok_or(DvcError::Diverged)?
            .solve(&jac.tr_mul(&resid));
        if q.iter().any(|v| !v.is_finite()) {
            return Err(DvcError::Diverged);
        }
        for a in 0..3 {
            p[4 * a] += q[4 * a];
            for k in 1..4 {
                p[4 * a + k] += q[4 * a + k] / mf;
            }
        }
        if q.norm() < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(DvcError::Diverged);
    }
    for (i, o) in offs.iter().enumerate() {
        g[i] = sample(def, warp(&p, o))?;
    }
    let cost = criterion_value(opts.criterion, &f, &g).ok_or(DvcError::Diverged)?;
    Ok(([p[0], p[4], p[8]], cost))
}

/// Independent matching of every grid point. Points whose match fails are
/// flagged invalid; the call fails only when no point matches.
pub fn dvc_match(
    reference: &Volume,
    def: &Volume,
    grid: &VolGrid,
    opts: &DvcOptions,
) -> Result<VolDisplacement, DvcError> {
    if reference.dims() != def.dims() {
        return Err(DvcError::InvalidVolume("reference and deformed volumes differ in size".into()));
    }
    let grad = Gradients::new(def);
    let idx: Vec<usize> = (0..grid.len()).collect();
    let results = map_ordered(&idx, |&i| dvc_match_inner(reference, def, &grad, grid.point(i), grid.m, opts));
    let n = grid.len();
    let mut out = VolDisplacement {
        grid: grid.clone(),
        criterion: opts.criterion,
        u: vec![f64::NAN; n],
        v: vec![f64::NAN; n],
        w: vec![f64::NAN; n],
        cost: vec![f64::NAN; n],
        valid: vec![false; n],
    };
    let mut first_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((d, c)) => {
                out.u[i] = d[0];
                out.v[i] = d[1];
                out.w[i] = d[2];
                out.cost[i] = c;
                out.valid[i] = true;
            }
            Err(e @ DvcError::SubvolumeOutOfBounds(..)) => return Err(e),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) if out.valid_count() == 0 => Err(e),
        _ => Ok(out),
    }
}

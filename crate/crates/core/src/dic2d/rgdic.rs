use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::grid::{DisplacementField, RoiGrid, SeedPoint};
use super::refine::{refine_nr, MatchResult, SolverOptions};
use super::search::integer_search;
use super::shape::{DeformVector, ShapeOrder, SubsetSpec};
use super::DicError;
use crate::image::{GrayImage, Interpolator};
use crate::par::map_ordered;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RgdicOptions {
    /// Subset half-width.
    pub m: usize,
    pub order: ShapeOrder,
    pub solver: SolverOptions,
    /// Points correlating below this ZNCC are invalid.
    pub zncc_floor: f64,
    /// Integer search radius for seeds without an initial guess, px.
    pub search_radius: usize,
    /// Re-anchor on an intermediate image when the valid fraction drops.
    pub incremental: bool,
    pub reanchor_fraction: f64,
}

impl Default for RgdicOptions {
    fn default() -> Self {
        Self {
            m: 15,
            order: ShapeOrder::First,
            solver: SolverOptions::default(),
            zncc_floor: 0.5,
            search_radius: 10,
            incremental: false,
            reanchor_fraction: 0.8,
        }
    }
}

impl RgdicOptions {
    /// Defaults for stereo matching: second-order shape functions.
    pub fn stereo() -> Self {
        Self {
            order: ShapeOrder::Second,
            ..Self::default()
        }
    }
}

struct Entry {
    zncc: f64,
    row: usize,
    col: usize,
    index: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: highest zncc first, then smallest (row, col)
        self.zncc
            .total_cmp(&other.zncc)
            .then_with(|| (other.row, other.col).cmp(&(self.row, self.col)))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

fn check_options(opts: &RgdicOptions) -> Result<(), DicError> {
    if opts.m == 0 || !(-1.0..=1.0).contains(&opts.zncc_floor) {
        return Err(DicError::InvalidOptions(format!(
            "subset m {} must be positive and zncc floor {} in [-1, 1]",
            opts.m, opts.zncc_floor
        )));
    }
    if !(0.0..=1.0).contains(&opts.reanchor_fraction) {
        return Err(DicError::InvalidOptions(format!(
            "re-anchor fraction {} outside [0, 1]",
            opts.reanchor_fraction
        )));
    }
    Ok(())
}

/// Full-field matching by reliability-guided propagation from the seeds.
///
/// Each computed point hands its shape to its uncomputed 4-neighbors, always
/// expanding from the best-correlated point first. Propagation never crosses
/// masked points or points with a different partition label.
pub fn rgdic(
    reference: &GrayImage,
    def: &GrayImage,
    roi: &RoiGrid,
    seeds: &[SeedPoint],
    opts: &RgdicOptions,
) -> Result<DisplacementField, DicError> {
    check_options(opts)?;
    let (w, h) = (reference.width(), reference.height());
    if (w, h) != (def.width(), def.height()) {
        return Err(DicError::SizeMismatch(w, h, def.width(), def.height()));
    }
    let mut grid = roi.clone();
    grid.fit_to_subsets(opts.m, w, h);
    if grid.active_count() == 0 {
        return Err(DicError::EmptyRoi);
    }
    let seed_idx = seeds
        .iter()
        .map(|s| {
            grid.index_of(s.x, s.y)
                .filter(|&i| grid.mask[i])
                .ok_or(DicError::SeedOutsideRoi { x: s.x, y: s.y })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut labels: Vec<i32> = grid
        .mask
        .iter()
        .zip(&grid.labels)
        .filter(|(m, l)| **m && **l != 0)
        .map(|(_, l)| *l)
        .collect();
    labels.sort_unstable();
    labels.dedup();
    for l in labels {
        if !seed_idx.iter().any(|&i| grid.labels[i] == l) {
            return Err(DicError::PartitionWithoutSeed(l));
        }
    }
    if seed_idx.is_empty() {
        return Err(DicError::InvalidOptions("at least one seed is required".into()));
    }

    let interp = Interpolator::new(def);
    let subset_at = |i: usize| {
        let (x, y) = grid.point(i);
        SubsetSpec::new(x, y, opts.m)
    };
    let solve = |i: usize, p0: &DeformVector| -> Option<MatchResult> {
        refine_nr(reference, &interp, &subset_at(i), &p0.with_order(opts.order), &opts.solver).ok()
    };

    let mut st = State {
        field: DisplacementField::empty(grid.clone()),
        shapes: vec![None; grid.len()],
        heap: BinaryHeap::new(),
        floor: opts.zncc_floor,
    };

    for (seed, &i) in seeds.iter().zip(&seed_idx) {
        if st.field.valid[i] {
            continue;
        }
        let (p0, search_zncc) = match &seed.initial_guess {
            Some(p) => (*p, f64::NAN),
            None => {
                let m = integer_search(reference, def, &subset_at(i), opts.search_radius)?;
                (DeformVector::translation(opts.order, m.du as f64, m.dv as f64), m.zncc)
            }
        };
        let failed = |zncc| DicError::SeedFailed {
            x: seed.x,
            y: seed.y,
            zncc,
        };
        let r = refine_nr(reference, &interp, &subset_at(i), &p0.with_order(opts.order), &opts.solver)
            .map_err(|_| failed(search_zncc))?;
        if !st.commit(&grid, i, &r) {
            return Err(failed(r.c_zncc));
        }
    }

    while let Some(top) = st.heap.pop() {
        let p = st.shapes[top.index].expect("queued points are computed");
        let label = grid.labels[top.index];
        let todo: Vec<usize> = grid
            .neighbors(top.index)
            .filter(|&n| grid.mask[n] && !st.field.valid[n] && grid.labels[n] == label)
            .collect();
        let results = map_ordered(&todo, |&n| solve(n, &p));
        for (&n, r) in todo.iter().zip(results) {
            if let Some(r) = r {
                st.commit(&grid, n, &r);
            }
        }
    }
    Ok(st.field)
}

struct State {
    field: DisplacementField,
    shapes: Vec<Option<DeformVector>>,
    heap: BinaryHeap<Entry>,
    floor: f64,
}

impl State {
    /// Records a match; queues it when it clears the floor.
    fn commit(&mut self, grid: &RoiGrid, i: usize, r: &MatchResult) -> bool {
        self.field.u[i] = r.p.u;
        self.field.v[i] = r.p.v;
        self.field.zncc[i] = r.c_zncc;
        if r.c_zncc < self.floor || !r.p.is_finite() {
            return false;
        }
        self.field.valid[i] = true;
        self.shapes[i] = Some(r.p);
        let (row, col) = grid.row_col(i);
        self.heap.push(Entry {
            zncc: r.c_zncc,
            row,
            col,
            index: i,
        });
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    /// Displacements from the original reference.
    pub field: DisplacementField,
    /// Image the frame was matched against: 0 for the reference, `k` for
    /// deformed frame `k - 1`.
    pub anchor: usize,
}

/// Matches each deformed frame against the reference. With
/// `opts.incremental`, a frame whose valid fraction drops below
/// `opts.reanchor_fraction` is re-matched against the previous frame and its
/// displacements composed with that frame's field.
pub fn rgdic_sequence(
    reference: &GrayImage,
    frames: &[GrayImage],
    roi: &RoiGrid,
    seeds: &[SeedPoint],
    opts: &RgdicOptions,
) -> Result<Vec<FrameResult>, DicError> {
    let mut out: Vec<FrameResult> = Vec::with_capacity(frames.len());
    let mut anchor = 0usize;
    for (k, frame) in frames.iter().enumerate() {
        let mut result = match_against(reference, frames, roi, seeds, opts, &out, anchor, frame)?;
        if opts.incremental
            && result.field.valid_fraction() < opts.reanchor_fraction
            && k > 0
            && anchor != k
        {
            let candidate = match_against(reference, frames, roi, seeds, opts, &out, k, frame);
            if let Ok(r) = candidate {
                if r.field.valid_count() > result.field.valid_count() {
                    anchor = k;
                    result = r;
                }
            }
        }
        out.push(result);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn match_against(
    reference: &GrayImage,
    frames: &[GrayImage],
    roi: &RoiGrid,
    seeds: &[SeedPoint],
    opts: &RgdicOptions,
    done: &[FrameResult],
    anchor: usize,
    frame: &GrayImage,
) -> Result<FrameResult, DicError> {
    if anchor == 0 {
        return Ok(FrameResult {
            field: rgdic(reference, frame, roi, seeds, opts)?,
            anchor,
        });
    }
    let base = &done[anchor - 1].field;
    let step = rgdic(&frames[anchor - 1], frame, roi, seeds, opts)?;
    Ok(FrameResult {
        field: compose(base, &step),
        anchor,
    })
}

/// Total displacement `d(X) = base(X) + step(X + base(X))`, with `step`
/// interpolated bilinearly at the intermediate positions.
fn compose(base: &DisplacementField, step: &DisplacementField) -> DisplacementField {
    let mut out = DisplacementField::empty(base.grid.clone());
    for i in 0..base.grid.len() {
        if !base.valid[i] {
            continue;
        }
        let (x, y) = base.grid.point(i);
        let (xm, ym) = (x as f64 + base.u[i], y as f64 + base.v[i]);
        if let Some((du, dv, z)) = step.sample(xm, ym) {
            out.u[i] = base.u[i] + du;
            out.v[i] = base.v[i] + dv;
            out.zncc[i] = z.min(base.zncc[i]);
            out.valid[i] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{synth_deform, AnalyticWarp};
    use crate::par::with_workers;
    use crate::speckle::{gen_speckle, SpeckleParams};

    fn speckle(w: usize, h: usize, seed: u64) -> GrayImage {
        let p = SpeckleParams {
            rng_seed: seed,
            ..Default::default()
        };
        gen_speckle(&p, w, h).unwrap()
    }

    fn opts() -> RgdicOptions {
        RgdicOptions {
            m: 10,
            search_radius: 4,
            ..Default::default()
        }
    }

    #[test]
    fn uniform_translation() {
        let img = speckle(120, 120, 11);
        let def = synth_deform(&img, &AnalyticWarp::Translation { u: 0.5, v: 0.25 })
            .unwrap()
            .image;
        let roi = RoiGrid::rect(20, 20, 100, 100, 8).unwrap();
        let f = rgdic(&img, &def, &roi, &[SeedPoint::at(60, 60)], &opts()).unwrap();
        assert!(f.valid_count() > 90);
        for i in 0..f.grid.len() {
            if f.valid[i] {
                assert!((f.u[i] - 0.5).abs() < 0.01 && (f.v[i] - 0.25).abs() < 0.01);
                assert!(f.zncc[i] >= 0.5);
            }
        }
    }

    #[test]
    fn masked_band_blocks_propagation() {
        let img = speckle(120, 120, 12);
        let def = synth_deform(&img, &AnalyticWarp::Translation { u: 0.3, v: 0.0 })
            .unwrap()
            .image;
        let mut roi = RoiGrid::rect(20, 20, 100, 100, 8).unwrap();
        roi.retain(|x, _| !(50..=60).contains(&x));
        roi.set_labels(|x, _| if x < 55 { 1 } else { 2 });
        assert_eq!(
            rgdic(&img, &def, &roi, &[SeedPoint::at(36, 60)], &opts()),
            Err(DicError::PartitionWithoutSeed(2))
        );
        roi.set_labels(|_, _| 0);
        let f = rgdic(&img, &def, &roi, &[SeedPoint::at(36, 60)], &opts()).unwrap();
        for i in 0..f.grid.len() {
            let (x, _) = f.grid.point(i);
            assert_eq!(f.valid[i], x < 50, "point {:?}", f.grid.point(i));
        }
    }

    #[test]
    fn labels_confine_propagation() {
        let img = speckle(120, 120, 13);
        let def = synth_deform(&img, &AnalyticWarp::Translation { u: 0.3, v: 0.0 })
            .unwrap()
            .image;
        let mut roi = RoiGrid::rect(20, 20, 100, 100, 8).unwrap();
        roi.set_labels(|x, _| if x < 60 { 1 } else { 2 });
        let seeds = [SeedPoint::at(36, 60), SeedPoint::at(84, 60)];
        let f = rgdic(&img, &def, &roi, &seeds, &opts()).unwrap();
        assert_eq!(f.valid_count(), f.grid.active_count());
    }

    #[test]
    fn bad_seed() {
        let img = speckle(96, 96, 14);
        let other = speckle(96, 96, 99);
        let roi = RoiGrid::rect(24, 24, 72, 72, 8).unwrap();
        assert!(matches!(
            rgdic(&img, &other, &roi, &[SeedPoint::at(48, 48)], &opts()),
            Err(DicError::SeedFailed { .. })
        ));
        assert!(matches!(
            rgdic(&img, &img, &roi, &[SeedPoint::at(49, 48)], &opts()),
            Err(DicError::SeedOutsideRoi { .. })
        ));
        let tiny = RoiGrid::rect(0, 0, 5, 5, 1).unwrap();
        assert_eq!(
            rgdic(&img, &img, &tiny, &[SeedPoint::at(0, 0)], &opts()),
            Err(DicError::EmptyRoi)
        );
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let img = speckle(100, 100, 15);
        let warp = AnalyticWarp::Affine {
            u: 0.4,
            v: -0.3,
            ux: 0.01,
            uy: 0.0,
            vx: 0.0,
            vy: -0.005,
            cx: 50.0,
            cy: 50.0,
        };
        let def = synth_deform(&img, &warp).unwrap().image;
        let roi = RoiGrid::rect(20, 20, 80, 80, 6).unwrap();
        let run = |n| with_workers(n, || rgdic(&img, &def, &roi, &[SeedPoint::at(50, 50)], &opts()).unwrap());
        let a = run(1);
        for n in [2, 8] {
            let b = run(n);
            assert_eq!(a.valid, b.valid);
            for i in 0..a.grid.len() {
                assert_eq!(a.u[i].to_bits(), b.u[i].to_bits());
                assert_eq!(a.v[i].to_bits(), b.v[i].to_bits());
            }
        }
    }

    #[test]
    fn sequence_composes_through_an_anchor() {
        let img = speckle(120, 120, 16);
        let frames: Vec<GrayImage> = [0.6, 1.2]
            .iter()
            .map(|&u| {
                synth_deform(&img, &AnalyticWarp::Translation { u, v: 0.0 })
                    .unwrap()
                    .image
            })
            .collect();
        let roi = RoiGrid::rect(24, 24, 96, 96, 8).unwrap();
        let seeds = [SeedPoint::at(56, 56)];
        let mut o = opts();
        o.incremental = true;
        // force re-anchoring on every frame after the first
        o.reanchor_fraction = 1.0;
        let res = rgdic_sequence(&img, &frames, &roi, &seeds, &o).unwrap();
        assert_eq!(res[0].anchor, 0);
        let f = &res[1].field;
        assert!(f.valid_count() > 0);
        for i in 0..f.grid.len() {
            if f.valid[i] {
                assert!((f.u[i] - 1.2).abs() < 0.02 && f.v[i].abs() < 0.02);
            }
        }
    }
}

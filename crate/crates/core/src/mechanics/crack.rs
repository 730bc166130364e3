use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{CrackTip, MechError};
use crate::dic2d::DisplacementField;

/// Samples per side used for the quadratic trends of a profile.
const TREND_SAMPLES: usize = 4;
/// Profiles behind the transition used to extrapolate the opening to zero.
const TIP_FIT_PROFILES: usize = 6;

struct Profile {
    s: f64,
    /// Crack-normal coordinate of the jump.
    n: f64,
    jump: f64,
    noise: f64,
}

fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let sse: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Some((my - slope * mx, slope, sse))
}

/// Quadratic least squares about `x0`; returns the value at `x0` and the
/// residual sum of squares.
fn quad_fit(pts: &[(f64, f64)], x0: f64) -> Option<(f64, f64)> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(x, y) in pts {
        let d = x - x0;
        let a = Vector3::new(1.0, d, d * d);
        ata += a * a.transpose();
        atb += a * y;
    }
    let c = ata.lu().solve(&atb)?;
    let sse = pts
        .iter()
        .map(|&(x, y)| {
            let d = x - x0;
            (y - c[0] - c[1] * d - c[2] * d * d).powi(2)
        })
        .sum();
    Some((c[0], sse))
}

/// Opening jump across the largest positive step of a profile of
/// crack-normal displacement, measured between quadratic trends fitted on
/// each side and evaluated midway across the step.
fn profile_jump(samples: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if samples.len() < 2 * TREND_SAMPLES {
        return None;
    }
    let j = (TREND_SAMPLES - 1..samples.len() - TREND_SAMPLES)
        .max_by(|&a, &b| {
            let da = samples[a + 1].1 - samples[a].1;
            let db = samples[b + 1].1 - samples[b].1;
            da.total_cmp(&db).then(b.cmp(&a))
        })?;
    let nc = 0.5 * (samples[j].0 + samples[j + 1].0);
    let lo = quad_fit(&samples[j + 1 - TREND_SAMPLES..=j], nc)?;
    let hi = quad_fit(&samples[j + 1..=j + TREND_SAMPLES], nc)?;
    let dof = (2 * TREND_SAMPLES - 6) as f64;
    Some((nc, hi.0 - lo.0, ((lo.1 + hi.1) / dof).sqrt()))
}

fn extent(disp: &DisplacementField, frame: &CrackTip) -> (f64, f64, f64, f64) {
    let g = &disp.grid;
    let (mut s0, mut s1, mut n0, mut n1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for i in 0..g.len() {
        if disp.valid[i] {
            let (x, y) = g.point(i);
            let (s, n) = frame.to_local(x as f64, y as f64);
            s0 = s0.min(s);
            s1 = s1.max(s);
            n0 = n0.min(n);
            n1 = n1.max(n);
        }
    }
    (s0, s1, n0, n1)
}

fn profiles(disp: &DisplacementField, frame: &CrackTip) -> Vec<Profile> {
    let h = disp.grid.spacing as f64;
    let (s0, s1, n0, n1) = extent(disp, frame);
    if s0 > s1 {
        return Vec::new();
    }
    let (ns, nn) = (((s1 - s0) / h).floor() as usize, ((n1 - n0) / h).floor() as usize);
    let mut out = Vec::new();
    for k in 0..=ns {
        let s = s0 + k as f64 * h;
        let samples: Vec<(f64, f64)> = (0..=nn)
            .filter_map(|j| {
                let n = n0 + j as f64 * h;
                let (x, y) = frame.to_global(s, n);
                let (u, v, _) = disp.sample(x, y)?;
                Some((n, frame.rotate_in(u, v).1))
            })
            .collect();
        if let Some((n, jump, noise)) = profile_jump(&samples) {
            out.push(Profile { s, n, jump, noise });
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Crack tip from profiles of crack-normal displacement taken perpendicular
/// to the crack at successive positions along `axis` (pointing from the
/// notch toward the ligament).
///
/// Each profile yields the opening between linear trends fitted on either
/// side of its largest step. A profile counts as open when its step sits on
/// the crack line and the opening exceeds three times both the median and
/// its own trend-fit residual. Marching from the notch, the tip lies
/// between the last open profile and the first closed one. Within that gap
/// the tip is placed where the squared opening of the preceding profiles,
/// extrapolated linearly, reaches zero; this follows the square-root
/// opening of an elastic crack and falls back to the gap midpoint.
pub fn locate_crack_tip(disp: &DisplacementField, axis: (f64, f64)) -> Result<CrackTip, MechError> {
    let frame = CrackTip::new(0.0, 0.0, axis)?;
    let profs = profiles(disp, &frame);
    let h = disp.grid.spacing as f64;
    let scale = profs.iter().map(|p| p.jump.abs()).fold(0.0, f64::max);
    let floor = (3.0 * median(profs.iter().map(|p| p.noise).collect())).max(1e-9 * (1.0 + scale));
    // the crack line is where the clearly open profiles have their step
    let line = median(profs.iter().filter(|p| p.jump > 0.5 * scale).map(|p| p.n).collect());
    let open = |p: &Profile| p.jump > floor && p.jump > 3.0 * p.noise && (p.n - line).abs() <= h;
    let first = profs.iter().position(open).ok_or(MechError::NoDiscontinuityFound)?;
    let stop = profs[first..].iter().position(|p| !open(p)).map(|k| first + k);
    let last = stop.map_or(profs.len() - 1, |k| k - 1);
    let s_lo = profs[last].s;
    let s_hi = stop.map_or(s_lo, |k| profs[k].s);

    let used = &profs[last + 1 - (last + 1 - first).min(TIP_FIT_PROFILES)..=last];
    let fit = line_fit(&used.iter().map(|p| (p.s, p.jump * p.jump)).collect::<Vec<_>>());
    let s_tip = match fit {
        Some((c, m, _)) if m > 0.0 => (-c / m).clamp(s_lo, s_hi),
        _ => 0.5 * (s_lo + s_hi),
    };
    let n_tip = median(used.iter().map(|p| p.n).collect());
    let (x, y) = frame.to_global(s_tip, n_tip);
    CrackTip::new(x, y, axis)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtodResult {
    pub ctod: f64,
    /// Reference points (below, above the crack) in image coordinates.
    pub pair: [(f64, f64); 2],
    /// Distance of the pair behind the tip.
    pub distance: f64,
}

/// Relative crack-normal opening between reference points placed
/// `offset` either side of the crack line, at distances behind the tip
/// growing by one grid spacing. The first candidate after which the
/// opening slope stays below 5% of its peak for three consecutive steps
/// marks the plateau; its opening is the CTOD.
pub fn ctod(disp: &DisplacementField, tip: &CrackTip, offset: f64) -> Result<CtodResult, MechError> {
    if !(offset > 0.0) {
        return Err(MechError::Invalid("reference offset must be positive".into()));
    }
    let h = disp.grid.spacing as f64;
    let mut cands: Vec<(f64, f64, [(f64, f64); 2])> = Vec::new();
    for k in 1.. {
        let d = k as f64 * h;
        let lo = tip.to_global(-d, -offset);
        let hi = tip.to_global(-d, offset);
        let (Some(a), Some(b)) = (disp.sample(lo.0, lo.1), disp.sample(hi.0, hi.1)) else {
            break;
        };
        let open = tip.rotate_in(b.0 - a.0, b.1 - a.1).1;
        cands.push((d, open, [lo, hi]));
    }
    if cands.len() < 4 {
        return Err(MechError::NoPlateau);
    }
    let slopes: Vec<f64> = cands.windows(2).map(|w| (w[1].1 - w[0].1) / h).collect();
    let peak = slopes.iter().map(|s| s.abs()).fold(0.0, f64::max);
    let tol = (0.05 * peak).max(1e-12);
    let k = (0..slopes.len().saturating_sub(2))
        .find(|&k| slopes[k..k + 3].iter().all(|s| s.abs() < tol))
        .ok_or(MechError::NoPlateau)?;
    let (d, open, pair) = cands[k];
    Ok(CtodResult {
        ctod: open,
        pair,
        distance: d,
    })
}

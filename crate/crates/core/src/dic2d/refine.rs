use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cost::{reference_values, zero_normalize};
use super::shape::{warp_point, DeformVector, SubsetSpec};
use super::DicError;
use crate::image::{GrayImage, Interpolator};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the shape update norm falls below this, in pixels
    /// (gradient terms scaled by `M`, second-order terms by `M^2`).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub p: DeformVector,
    pub c_znssd: f64,
    pub c_zncc: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-parameter scale turning shape parameters into pixel units at the
/// subset edge.
fn param_scales(n: usize, m: f64) -> Vec<f64> {
    let mut s = vec![1.0, m, m, 1.0, m, m];
    if n == 12 {
        s.extend([m * m; 6]);
    }
    s
}

/// Refines `p0` by Gauss-Newton iterations on the ZNSSD cost.
///
/// The update solves the linearized zero-normalized residual
/// `s (f - f_m) - (g - g_m)` with `s = sum (g - g_m)^2 / sum (f - f_m)(g - g_m)`,
/// whose fixed points are exactly the stationary points of ZNSSD.
pub fn refine_nr(
    reference: &GrayImage,
    def: &Interpolator,
    subset: &SubsetSpec,
    p0: &DeformVector,
    opts: &SolverOptions,
) -> Result<MatchResult, DicError> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(DicError::InvalidOptions(format!(
            "tol {} and max_iter {} must be positive",
            opts.tol, opts.max_iter
        )));
    }
    let mut f = reference_values(reference, subset)?;
    let nf = zero_normalize(&mut f);
    let n_px = f.len();
    if nf <= 1e-12 * (n_px as f64).sqrt() {
        return Err(DicError::ZeroVarianceSubset);
    }
    let m = subset.m.max(1) as f64;
    let offsets: Vec<(f64, f64)> = subset
        .offsets()
        .map(|(dx, dy)| (dx as f64, dy as f64))
        .collect();
    let mut params = p0.to_params();
    let n = params.len();
    let scales = param_scales(n, m);

    let mut g = vec![0.0; n_px];
    let mut jac = DMatrix::<f64>::zeros(n_px, n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let p = DeformVector::from_params(&params);
        for (i, &(dx, dy)) in offsets.iter().enumerate() {
            let (x, y) = warp_point(&p, subset, dx, dy);
            let (val, gx, gy) = def
                .value_grad(x, y)
                .map_err(|_| DicError::DivergedOutOfDomain { iterations })?;
            g[i] = val;
            // basis in units of the subset half-width
            let (a, b) = (dx / m, dy / m);
            let basis = [1.0, a, b, 0.5 * a * a, 0.5 * b * b, a * b];
            for k in 0..3 {
                jac[(i, k)] = gx * basis[k];
                jac[(i, 3 + k)] = gy * basis[k];
            }
            if n == 12 {
                for k in 0..3 {
                    jac[(i, 6 + k)] = gx * basis[3 + k];
                    jac[(i, 9 + k)] = gy * basis[3 + k];
                }
            }
        }
        let ng = zero_normalize(&mut g);
        if ng <= 1e-12 * (n_px as f64).sqrt() {
            return Err(DicError::SingularHessian);
        }
        let cross: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
        let gg: f64 = g.iter().map(|b| b * b).sum();
        let s = if cross > 0.0 { gg / cross } else { ng / nf };
        for k in 0..n {
            let mean = jac.column(k).sum() / n_px as f64;
            jac.column_mut(k).add_scalar_mut(-mean);
        }
        let resid = DVector::from_iterator(n_px, f.iter().zip(&g).map(|(a, b)| s * a - b));
        let hess = jac.tr_mul(&jac);
        let rhs = jac.tr_mul(&resid);
        let q = hess
            .cholesky()
            .ok_or(DicError::SingularHessian)?
            .solve(&rhs);
        if q.iter().any(|v| !v.is_finite()) {
            return Err(DicError::SingularHessian);
        }
        for k in 0..n {
            params[k] += q[k] / scales[k];
        }
        iterations += 1;
        if q.norm() < opts.tol {
            converged = true;
            break;
        }
    }

    let p = DeformVector::from_params(&params);
    for (i, &(dx, dy)) in offsets.iter().enumerate() {
        let (x, y) = warp_point(&p, subset, dx, dy);
        g[i] = def
            .value(x, y)
            .map_err(|_| DicError::DivergedOutOfDomain { iterations })?;
    }
    let ng = zero_normalize(&mut g);
    if ng <= 1e-12 * (n_px as f64).sqrt() {
        return Err(DicError::ZeroVarianceSubset);
    }
    let c_znssd: f64 = f
        .iter()
        .zip(&g)
        .map(|(a, b)| (a / nf - b / ng).powi(2))
        .sum::<f64>()
        .clamp(0.0, 4.0);
    Ok(MatchResult {
        p,
        c_znssd,
        c_zncc: 1.0 - 0.5 * c_znssd,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dic2d::{cost, Criterion, ShapeOrder};
    use crate::image::{synth_deform, AnalyticWarp};
    use crate::speckle::{gen_speckle, SpeckleParams};
    use proptest::prelude::*;

    fn speckle(w: usize, h: usize, seed: u64) -> GrayImage {
        let p = SpeckleParams {
            rng_seed: seed,
            ..Default::default()
        };
        gen_speckle(&p, w, h).unwrap()
    }

    #[test]
    fn identity_converges_immediately() {
        let img = speckle(64, 64, 1);
        let itp = Interpolator::new(&img);
        let s = SubsetSpec::new(32, 32, 10);
        for order in [ShapeOrder::First, ShapeOrder::Second] {
            let r = refine_nr(&img, &itp, &s, &DeformVector::zero(order), &Default::default())
                .unwrap();
            assert!(r.converged && r.iterations <= 2);
            assert!(r.p.to_params().iter().all(|v| v.abs() < 1e-10));
            assert!((r.c_zncc - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn subpixel_translation() {
        let img = speckle(80, 80, 2);
        let def = synth_deform(&img, &AnalyticWarp::Translation { u: 0.3, v: 0.7 })
            .unwrap()
            .image;
        let itp = Interpolator::new(&def);
        let s = SubsetSpec::new(40, 40, 12);
        let r = refine_nr(&img, &itp, &s, &DeformVector::zero(ShapeOrder::First), &Default::default())
            .unwrap();
        assert!(r.converged);
        assert!((r.p.u - 0.3).abs() <= 0.01 && (r.p.v - 0.7).abs() <= 0.01, "{:?}", r.p);
        assert!((r.c_zncc - (1.0 - 0.5 * r.c_znssd)).abs() < 1e-12);
    }

    #[test]
    fn small_rotation_gradients() {
        let img = speckle(96, 96, 3);
        let theta = 1f64.to_radians();
        let warp = AnalyticWarp::Rotation {
            theta,
            cx: 48.0,
            cy: 48.0,
        };
        let def = synth_deform(&img, &warp).unwrap().image;
        let itp = Interpolator::new(&def);
        let s = SubsetSpec::new(48, 48, 15);
        let r = refine_nr(&img, &itp, &s, &DeformVector::zero(ShapeOrder::First), &Default::default())
            .unwrap();
        assert!((r.p.uy + theta.sin()).abs() < 5e-3, "{:?}", r.p);
        assert!((r.p.vx - theta.sin()).abs() < 5e-3, "{:?}", r.p);
    }

    #[test]
    fn second_order_fits_quadratic_warp() {
        let img = speckle(96, 96, 4);
        let mut params = [0.0; 12];
        params[0] = 0.4;
        params[3] = -0.2;
        params[1] = 0.01;
        params[6] = 4e-4;
        params[10] = -3e-4;
        let warp = AnalyticWarp::Polynomial {
            params,
            cx: 48.0,
            cy: 48.0,
        };
        let def = synth_deform(&img, &warp).unwrap().image;
        let itp = Interpolator::new(&def);
        let s = SubsetSpec::new(48, 48, 15);
        let opts = SolverOptions {
            tol: 1e-6,
            ..Default::default()
        };
        let first = refine_nr(&img, &itp, &s, &DeformVector::zero(ShapeOrder::First), &opts).unwrap();
        let second = refine_nr(&img, &itp, &s, &DeformVector::zero(ShapeOrder::Second), &opts).unwrap();
        assert!(second.c_znssd < first.c_znssd);
        assert!((second.p.u - 0.4).abs() < 0.01 && (second.p.v + 0.2).abs() < 0.01);
        let so = second.p.second.unwrap();
        assert!((so.uxx - 4e-4).abs() < 1e-4 && (so.vyy + 3e-4).abs() < 1e-4, "{so:?}");
    }

    #[test]
    fn flat_subset_is_rejected() {
        let flat = GrayImage::filled(40, 40, 0.5).unwrap();
        let itp = Interpolator::new(&flat);
        let r = refine_nr(
            &flat,
            &itp,
            &SubsetSpec::new(20, 20, 5),
            &DeformVector::zero(ShapeOrder::First),
            &Default::default(),
        );
        assert_eq!(r, Err(DicError::ZeroVarianceSubset));
    }

    #[test]
    fn runaway_guess_reports_divergence() {
        let img = speckle(48, 48, 5);
        let itp = Interpolator::new(&img);
        let p0 = DeformVector::translation(ShapeOrder::First, 40.0, 0.0);
        let r = refine_nr(&img, &itp, &SubsetSpec::new(24, 24, 8), &p0, &Default::default());
        assert!(matches!(r, Err(DicError::DivergedOutOfDomain { .. })));
    }

    #[test]
    fn final_cost_matches_cost_api() {
        let img = speckle(64, 64, 6);
        let def = synth_deform(&img, &AnalyticWarp::Translation { u: 0.45, v: -0.3 })
            .unwrap()
            .image;
        let itp = Interpolator::new(&def);
        let s = SubsetSpec::new(32, 32, 10);
        let r = refine_nr(&img, &itp, &s, &DeformVector::zero(ShapeOrder::First), &Default::default())
            .unwrap();
        let direct = cost(&img, &itp, &s, &r.p, Criterion::Znssd).unwrap();
        assert!((direct - r.c_znssd).abs() < 1e-12);
        let zncc = cost(&img, &itp, &s, &r.p, Criterion::Zncc).unwrap();
        assert!((zncc - r.c_zncc).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lighting_does_not_move_the_solution(
            seed in 0u64..1000,
            u in -0.9f64..0.9,
            v in -0.9f64..0.9,
        ) {
            let img = speckle(64, 64, seed);
            let def = synth_deform(&img, &AnalyticWarp::Translation { u, v }).unwrap().image;
            let dim = def.affine_intensity(0.7, 0.05).unwrap();
            let s = SubsetSpec::new(32, 32, 10);
            let p0 = DeformVector::zero(ShapeOrder::First);
            let a = refine_nr(&img, &Interpolator::new(&def), &s, &p0, &Default::default()).unwrap();
            let b = refine_nr(&img, &Interpolator::new(&dim), &s, &p0, &Default::default()).unwrap();
            prop_assert!((a.p.u - b.p.u).abs() < 1e-8 && (a.p.v - b.p.v).abs() < 1e-8);
        }

        #[test]
        fn translation_equivariance(seed in 0u64..1000, sx in 0usize..6, sy in 0usize..6) {
            let big = speckle(80, 80, seed);
            let crop = |ox: usize, oy: usize| {
                GrayImage::from_fn(60, 60, |x, y| big.get(x + ox, y + oy)).unwrap()
            };
            let warp = AnalyticWarp::Translation { u: 0.35, v: -0.55 };
            let (r0, r1) = (crop(10, 10), crop(10 - sx, 10 - sy));
            let (d0, d1) = (synth_deform(&r0, &warp).unwrap().image, synth_deform(&r1, &warp).unwrap().image);
            let p0 = DeformVector::zero(ShapeOrder::First);
            let a = refine_nr(&r0, &Interpolator::new(&d0), &SubsetSpec::new(28, 28, 9), &p0, &Default::default()).unwrap();
            let b = refine_nr(&r1, &Interpolator::new(&d1), &SubsetSpec::new(28 + sx, 28 + sy, 9), &p0, &Default::default()).unwrap();
            for (x, y) in a.p.to_params().iter().zip(b.p.to_params()) {
                prop_assert!((x - y).abs() < 1e-8, "{:?} vs {:?}", a.p, b.p);
            }
        }
    }
}

//! Central-difference verification of the analytic gradient.

use super::config::FusionConfig;
use super::features::{FeatureGrid, GlobalFeature};
use super::model::{evaluate, LossTerm, PreparedSample, RefinerSample};
use super::params::FusionParams;
use crate::error::{Error, Result};
use crate::geom::Cloud;
use crate::losses::{Mask, MaskKind};
use crate::registration::pseudo_correspondence;
use crate::{CameraIntrinsics, SimilarityTransform};
use nalgebra::{DMatrix, DVector, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
}

/// Largest relative error between `analytic` and central differences of `f`.
///
/// The error of component k is `|a - n| / max(|a|, |n|, 1e-6 * max_j |a_j|, 1e-12)`;
/// the floor keeps components whose true derivative is negligible from being
/// judged on rounding noise.
pub fn finite_difference_check<F>(x: &[f64], analytic: &[f64], step: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if x.len() != analytic.len() {
        return Err(Error::shape("gradient length", x.len(), analytic.len()));
    }
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-6 * scale).max(1e-12);
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst_index: None,
        checked: x.len(),
    };
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        probe[k] = x[k] + step;
        let up = f(&probe)?;
        probe[k] = x[k] - step;
        let down = f(&probe)?;
        probe[k] = x[k];
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[k];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        if !err.is_finite() {
            return Err(Error::NonFinite(format!("gradient check at parameter {k}")));
        }
        if err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst_index = Some(k);
        }
    }
    Ok(out)
}

/// Compares the analytic gradient of one loss term with central differences.
pub fn grad_check(params: &FusionParams, cfg: &FusionConfig, sample: &RefinerSample, term: LossTerm) -> Result<GradCheck> {
    let prep = PreparedSample::new(sample, cfg)?;
    let weights = term.weights();
    let (_, grad) = evaluate(params, cfg, &prep, weights, true)?;
    let grad = grad.expect("gradient requested");
    finite_difference_check(params.values(), &grad, FD_STEP, |x| {
        let mut p = params.clone();
        p.values_mut().copy_from_slice(x);
        Ok(evaluate(&p, cfg, &prep, weights, false)?.0.objective)
    })
}

/// Random parameters with every tensor (head included) drawn from N(0, std²).
pub fn random_params(cfg: &FusionConfig, std: f64, seed: u64) -> FusionParams {
    let mut p = FusionParams::zeros(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("valid std");
    for v in p.values_mut() {
        *v = normal.sample(&mut rng);
    }
    p
}

/// Random but well-formed sample sized for `cfg`, with `points` prior points
/// in front of a camera whose image spans the level grids.
pub fn random_sample(cfg: &FusionConfig, points: usize, seed: u64) -> Result<RefinerSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l1 = &cfg.levels[0];
    let (w, h) = (l1.grid_w as f64 * l1.stride, l1.grid_h as f64 * l1.stride);
    let camera = CameraIntrinsics::new(1.2 * w, 1.2 * w, w / 2.0, h / 2.0, w as usize, h as usize)?;
    let blob = |rng: &mut ChaCha8Rng, n: usize| -> Result<Cloud<f64>> {
        Cloud::new(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-0.06..0.06),
                        rng.random_range(-0.06..0.06),
                        rng.random_range(0.45..0.6),
                    )
                })
                .collect(),
        )
    };
    let prior = blob(&mut rng, points)?;
    let target = blob(&mut rng, points + 3)?;
    let correspondence = pseudo_correspondence(&target, &SimilarityTransform::identity(), &prior)?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let grid = |rng: &mut ChaCha8Rng, l: usize| {
        let lc = &cfg.levels[l];
        let data = DMatrix::from_fn(lc.grid_h * lc.grid_w, lc.channels, |_, _| normal.sample(rng));
        FeatureGrid::new(lc.grid_h, lc.grid_w, lc.stride, data)
    };
    let grids = [grid(&mut rng, 0)?, grid(&mut rng, 1)?];
    let global = GlobalFeature(DVector::from_fn(cfg.global_dim(), |_, _| normal.sample(&mut rng)));
    let l2 = &cfg.levels[1];
    let bits: Vec<bool> = (0..l2.grid_h * l2.grid_w).map(|_| rng.random()).collect();
    let mask_target = Mask::from_bools(l2.grid_w, l2.grid_h, MaskKind::Amodal, &bits)?;
    Ok(RefinerSample {
        id: format!("random-{seed}"),
        prior,
        target,
        correspondence,
        camera,
        grids,
        global,
        mask_target,
        pose_terms: [rng.random(), rng.random()],
    })
}

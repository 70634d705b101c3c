//! Deterministic stand-in for learned visual features.

use super::render::splat_depth;
use super::scene::SceneSample;
use crate::error::{Error, Result};
use crate::fusion::{FeatureGrid, FusionConfig, GlobalFeature};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Raster channels: visible mask, relative object depth, occluder presence,
/// two ray coordinates and their squared radius.
pub const RAW_CHANNELS: usize = 6;
const DEPTH_SCALE: f64 = 20.0;
const RAY_SCALE: f64 = 4.0;

/// Per-pixel raw channels, pixel-major (`RAW_CHANNELS` values per pixel).
pub fn raw_channels(sample: &SceneSample, occluder_radius: f64, splat_radius: f64) -> Result<Vec<[f64; RAW_CHANNELS]>> {
    let k = &sample.camera;
    let (w, h) = (k.width, k.height);
    let obj_z = splat_depth(sample.object.points(), k, splat_radius)?;
    let occ_z = splat_depth(sample.hand.points(), k, occluder_radius)?;
    let mut vis_depths: Vec<f64> = (0..w * h)
        .filter(|&i| sample.visible.data()[i] >= 0.5 && obj_z[i].is_finite())
        .map(|i| obj_z[i])
        .collect();
    vis_depths.sort_by(f64::total_cmp);
    let reference = match vis_depths.len() {
        0 => 0.0,
        n if n % 2 == 1 => vis_depths[n / 2],
        n => 0.5 * (vis_depths[n / 2 - 1] + vis_depths[n / 2]),
    };
    Ok((0..w * h)
        .map(|i| {
            let (row, col) = (i / w, i % w);
            let vis = sample.visible.data()[i];
            let rel = if vis >= 0.5 && obj_z[i].is_finite() {
                (obj_z[i] - reference) * DEPTH_SCALE
            } else {
                0.0
            };
            let occ = if occ_z[i].is_finite() && !(obj_z[i] < occ_z[i]) { 1.0 } else { 0.0 };
            let xr = RAY_SCALE * (col as f64 - k.cx) / k.fx;
            let yr = RAY_SCALE * (row as f64 - k.cy) / k.fy;
            [vis, rel, occ, xr, yr, xr * xr + yr * yr]
        })
        .collect())
}

/// Average-pools the raw raster into a grid and expands it with a fixed
/// random linear map seeded by `seed`.
fn grid_from_raw(
    raw: &[[f64; RAW_CHANNELS]],
    width: usize,
    height: usize,
    grid_h: usize,
    grid_w: usize,
    stride: f64,
    channels: usize,
    seed: u64,
) -> Result<FeatureGrid> {
    let s = stride.round() as usize;
    if s == 0 || (s as f64 - stride).abs() > 1e-12 {
        return Err(Error::precondition(format!("feature stride {stride} must be a positive integer")));
    }
    let mut pooled = DMatrix::<f64>::zeros(grid_h * grid_w, RAW_CHANNELS);
    let mut counts = vec![0usize; grid_h * grid_w];
    for row in 0..height.min(grid_h * s) {
        for col in 0..width.min(grid_w * s) {
            let cell = (row / s) * grid_w + col / s;
            counts[cell] += 1;
            for (c, v) in raw[row * width + col].iter().enumerate() {
                pooled[(cell, c)] += v;
            }
        }
    }
    for (cell, &n) in counts.iter().enumerate() {
        if n > 0 {
            pooled.row_mut(cell).scale_mut(1.0 / n as f64);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let expand = DMatrix::from_fn(channels, RAW_CHANNELS, |_, _| normal.sample(&mut rng));
    FeatureGrid::new(grid_h, grid_w, stride, pooled * expand.transpose())
}

/// Fine and coarse feature grids plus the global feature (mean of the fine grid).
pub fn synth_features(
    sample: &SceneSample,
    cfg: &FusionConfig,
    seed: u64,
    splat_radius: f64,
    occluder_radius: f64,
) -> Result<([FeatureGrid; 2], GlobalFeature)> {
    let raw = raw_channels(sample, occluder_radius, splat_radius)?;
    let (w, h) = (sample.camera.width, sample.camera.height);
    let grid = |l: usize| {
        let lc = &cfg.levels[l];
        grid_from_raw(&raw, w, h, lc.grid_h, lc.grid_w, lc.stride, lc.channels, seed.wrapping_add(l as u64))
    };
    let grids = [grid(0)?, grid(1)?];
    let global = grids[0].mean();
    Ok((grids, global))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_scene, SceneConfig};
    use nalgebra::DVector;

    #[test]
    fn features_are_deterministic_pooled_and_seed_sensitive() {
        let scfg = SceneConfig::default();
        let s = make_scene(&scfg, 3).unwrap();
        let cfg = FusionConfig::default();
        let (g1, glob1) = synth_features(&s, &cfg, 5, 2.0, 5.0).unwrap();
        let (g2, glob2) = synth_features(&s, &cfg, 5, 2.0, 5.0).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(glob1, glob2);
        assert_eq!((g1[0].height(), g1[0].width(), g1[0].channels()), (32, 32, 16));
        assert_eq!((g1[1].height(), g1[1].width()), (16, 16));
        let mut mean = DVector::zeros(16);
        for r in g1[0].data().row_iter() {
            mean += r.transpose();
        }
        mean /= 1024.0;
        assert!((mean - &glob1.0).amax() < 1e-9);
        let (g3, _) = synth_features(&s, &cfg, 6, 2.0, 5.0).unwrap();
        assert_ne!(g1[0], g3[0]);
    }
}

//! Fixed (untrained) point encoder producing per-patch geometric features.

use super::config::FusionConfig;
use crate::error::{Error, Result};
use crate::geom::{dist2, farthest_point_sampling, Cloud, KdTree};
use nalgebra::{DMatrix, DVector, Point3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatures {
    /// Indices into the prior of the patch centers.
    pub center_indices: Vec<usize>,
    pub centers: Vec<Point3<f64>>,
    /// Patch of every prior point (nearest center, lowest index on ties).
    pub point_patch: Vec<usize>,
    /// One row per patch.
    pub features: DMatrix<f64>,
}

impl PatchFeatures {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn members(&self, patch: usize) -> Vec<usize> {
        self.point_patch
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == patch)
            .map(|(i, _)| i)
            .collect()
    }
}

struct EncoderWeights {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

fn encoder_weights(cfg: &FusionConfig) -> EncoderWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.encoder_seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let w = DMatrix::from_fn(cfg.encoder_dim, 3, |_, _| normal.sample(&mut rng));
    let b = DVector::from_fn(cfg.encoder_dim, |_, _| 0.5 * normal.sample(&mut rng));
    EncoderWeights { w, b }
}

/// Groups the prior into patches at both levels and encodes each patch.
///
/// Centers are chosen by farthest point sampling from point 0, so the coarse
/// centers are the first entries of the fine ones. Points must lie in front
/// of the camera (z > 0).
pub fn encode_prior(prior: &Cloud<f64>, cfg: &FusionConfig) -> Result<[PatchFeatures; 2]> {
    cfg.validate()?;
    let n = prior.len();
    let need = cfg.levels[0].patches;
    if n < need {
        return Err(Error::precondition(format!(
            "prior has {n} points but {need} patches were requested"
        )));
    }
    if let Some((i, p)) = prior.points().iter().enumerate().find(|(_, p)| p.z <= 0.0) {
        return Err(Error::BehindCamera { index: i, z: p.z });
    }
    let enc = encoder_weights(cfg);
    let order = farthest_point_sampling(prior.points(), need, 0);
    let centroid = prior.centroid();
    let level = |count: usize| -> Result<PatchFeatures> {
        let center_indices = order[..count].to_vec();
        let centers: Vec<_> = center_indices.iter().map(|&i| prior.points()[i]).collect();
        let tree = KdTree::from_points(centers.clone())?;
        let point_patch: Vec<usize> = prior.points().iter().map(|p| tree.nearest_unchecked(p).0).collect();
        let d = cfg.geometric_dim();
        let mut features = DMatrix::from_element(count, d, f64::NEG_INFINITY);
        for (i, p) in prior.points().iter().enumerate() {
            let k = point_patch[i];
            let local = (p - centers[k]) * cfg.coord_scale;
            let h = (&enc.w * local + &enc.b).map(f64::tanh);
            for c in 0..cfg.encoder_dim {
                features[(k, c)] = features[(k, c)].max(h[c]);
            }
        }
        for (k, c) in centers.iter().enumerate() {
            let rel = (c - centroid) * cfg.coord_scale;
            let e = cfg.encoder_dim;
            features[(k, e)] = rel.x;
            features[(k, e + 1)] = rel.y;
            features[(k, e + 2)] = rel.z;
            features[(k, e + 3)] = cfg.ray_scale * c.x / c.z;
            features[(k, e + 4)] = cfg.ray_scale * c.y / c.z;
        }
        Ok(PatchFeatures {
            center_indices,
            centers,
            point_patch,
            features,
        })
    };
    Ok([level(need)?, level(cfg.levels[1].patches)?])
}

/// Dense inverse-distance interpolation matrix (targets × sources) over the
/// `k` nearest sources, weights 1/(d² + 1e-8); a source at exactly zero
/// distance takes all the weight.
pub(crate) fn interpolation_matrix(targets: &[Point3<f64>], sources: &[Point3<f64>], k: usize) -> Result<DMatrix<f64>> {
    let tree = KdTree::from_points(sources.to_vec())?;
    let k = k.min(sources.len());
    let mut m = DMatrix::zeros(targets.len(), sources.len());
    for (t, p) in targets.iter().enumerate() {
        let nn = tree.k_nearest(p, k)?;
        if let Some(&(j, _)) = nn.iter().find(|(j, _)| dist2(p, &sources[*j]) == 0.0) {
            m[(t, j)] = 1.0;
            continue;
        }
        let w: Vec<f64> = nn.iter().map(|&(_, d2)| 1.0 / (d2 + 1e-8)).collect();
        let total: f64 = w.iter().sum();
        for (&(j, _), wj) in nn.iter().zip(&w) {
            m[(t, j)] = wj / total;
        }
    }
    Ok(m)
}

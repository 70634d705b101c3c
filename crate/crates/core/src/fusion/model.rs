//! Full refinement forward pass, objective and analytic gradient.

use super::attention::{attention_backward, attention_forward, AttentionState};
use super::config::FusionConfig;
use super::decoder::{apply_offsets, decoder_backward, decoder_forward, Topology};
use super::features::{FeatureGrid, GlobalFeature};
use super::params::{FusionParams, GradBuffer};
use crate::error::{Error, Result};
use crate::geom::{Cloud, KdTree};
use crate::losses::{bce, LossParts, Mask, MaskKind, LAMBDA_PROJ, LAMBDA_WEIGHT, MASK_EPS};
use crate::registration::CorrespondenceMap;
use crate::CameraIntrinsics;
use nalgebra::{DMatrix, DVector, Point2, Vector3};

/// Everything the objective needs for one training scene.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinerSample {
    pub id: String,
    /// Registered prior in the camera frame.
    pub prior: Cloud<f64>,
    /// Ground-truth object points.
    pub target: Cloud<f64>,
    pub correspondence: CorrespondenceMap,
    pub camera: CameraIntrinsics,
    /// Fine and coarse visual grids.
    pub grids: [FeatureGrid; 2],
    pub global: GlobalFeature,
    /// Amodal mask at the coarse grid resolution.
    pub mask_target: Mask,
    /// Hand and object pose terms, constant with respect to the refiner.
    pub pose_terms: [f64; 2],
}

/// Coefficients of the differentiated objective. The attention term uses the
/// soft argmax so that it has a gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub rec: f64,
    pub weight: f64,
    pub proj: f64,
    pub mask: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Rec,
    Weight,
    Proj,
    Mask,
    Total,
}

impl LossTerm {
    pub const ALL: [LossTerm; 5] = [LossTerm::Rec, LossTerm::Weight, LossTerm::Proj, LossTerm::Mask, LossTerm::Total];

    pub fn weights(self) -> ObjectiveWeights {
        let zero = ObjectiveWeights { rec: 0.0, weight: 0.0, proj: 0.0, mask: 0.0 };
        match self {
            LossTerm::Rec => ObjectiveWeights { rec: 1.0, ..zero },
            LossTerm::Weight => ObjectiveWeights { weight: 1.0, ..zero },
            LossTerm::Proj => ObjectiveWeights { proj: 1.0, ..zero },
            LossTerm::Mask => ObjectiveWeights { mask: 1.0, ..zero },
            LossTerm::Total => ObjectiveWeights::total(),
        }
    }
}

impl ObjectiveWeights {
    pub fn total() -> Self {
        Self {
            rec: 1.0,
            weight: LAMBDA_WEIGHT,
            proj: LAMBDA_PROJ,
            mask: 1.0,
        }
    }

    pub fn rec_only() -> Self {
        LossTerm::Rec.weights()
    }
}

/// Sample with its prior-dependent structures precomputed.
pub struct PreparedSample<'a> {
    pub sample: &'a RefinerSample,
    pub topology: Topology,
    target_uv: Vec<Point2<f64>>,
    target_tree: KdTree<f64>,
}

impl<'a> PreparedSample<'a> {
    pub fn new(sample: &'a RefinerSample, cfg: &FusionConfig) -> Result<Self> {
        sample.target.require_non_empty("refiner target")?;
        let n = sample.prior.len();
        if sample.correspondence.len() != sample.target.len() || sample.correspondence.prior_len() != n {
            return Err(Error::shape("correspondence", sample.target.len(), sample.correspondence.len()));
        }
        for (l, g) in sample.grids.iter().enumerate() {
            let lc = &cfg.levels[l];
            if (g.height(), g.width(), g.channels()) != (lc.grid_h, lc.grid_w, lc.channels) {
                return Err(Error::shape(
                    format!("level {} grid", l + 1),
                    format!("{}x{}x{}", lc.grid_h, lc.grid_w, lc.channels),
                    format!("{}x{}x{}", g.height(), g.width(), g.channels()),
                ));
            }
        }
        if sample.global.len() != cfg.global_dim() {
            return Err(Error::shape("global feature", cfg.global_dim(), sample.global.len()));
        }
        let g2 = &sample.grids[1];
        if (sample.mask_target.width(), sample.mask_target.height()) != (g2.width(), g2.height()) {
            return Err(Error::shape("mask target", format!("{}x{}", g2.width(), g2.height()), format!("{}x{}", sample.mask_target.width(), sample.mask_target.height())));
        }
        let target_uv = sample.camera.project_all(sample.target.points())?;
        let scaled: Vec<_> = sample.target.points().iter().map(|p| p * cfg.loss_unit).collect();
        Ok(Self {
            sample,
            topology: Topology::build(&sample.prior, cfg)?,
            target_uv,
            target_tree: KdTree::from_points(scaled)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Loss terms; `weight` uses the hard argmax.
    pub parts: LossParts,
    pub soft_weight: f64,
    /// Weighted sum that the gradient refers to.
    pub objective: f64,
    pub refined: Cloud<f64>,
}

fn mask_logits(grid: &FeatureGrid, params: &FusionParams) -> DVector<f64> {
    let w = params.vector("mask.w");
    let b = params.slice("mask.b")[0];
    grid.data() * w + DVector::from_element(grid.cells(), b)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-cell foreground probability predicted from the coarse grid.
pub fn predict_mask(grid: &FeatureGrid, params: &FusionParams) -> Result<Mask> {
    let probs = mask_logits(grid, params).map(sigmoid);
    Mask::new(grid.width(), grid.height(), MaskKind::Probability, probs.iter().copied().collect())
}

/// Runs the refiner on a registered prior.
pub fn refine(
    params: &FusionParams,
    cfg: &FusionConfig,
    prior: &Cloud<f64>,
    grids: &[FeatureGrid; 2],
    global: &GlobalFeature,
) -> Result<Cloud<f64>> {
    let topo = Topology::build(prior, cfg)?;
    let fine = attention_forward(0, &topo.levels[0], &grids[0], global, params)?.0;
    let coarse = attention_forward(1, &topo.levels[1], &grids[1], global, params)?.0;
    super::decoder::decode(&topo, &fine, &coarse, prior, params, cfg)
}

/// Forward pass and, when `want_grad`, the gradient of `weights`-combined terms.
pub fn evaluate(
    params: &FusionParams,
    cfg: &FusionConfig,
    prep: &PreparedSample,
    weights: ObjectiveWeights,
    want_grad: bool,
) -> Result<(Evaluation, Option<Vec<f64>>)> {
    let s = prep.sample;
    let topo = &prep.topology;
    let (fine, fine_cache) = attention_forward(0, &topo.levels[0], &s.grids[0], &s.global, params)?;
    let (coarse, coarse_cache) = attention_forward(1, &topo.levels[1], &s.grids[1], &s.global, params)?;
    let (off, dec_cache) = decoder_forward(topo, &fine, &coarse, params)?;
    let refined_pts = apply_offsets(&s.prior, &off, cfg.coord_scale);
    if let Some(i) = refined_pts
        .iter()
        .position(|p| !(p.coords * cfg.loss_unit).iter().all(|v| v.is_finite()))
    {
        return Err(Error::NonFinite(format!("refined point {i}")));
    }
    let n = refined_pts.len();
    let m = s.target.len();
    let unit = cfg.loss_unit;
    let mut g_pts = vec![Vector3::zeros(); n];

    // reconstruction: chamfer in loss units
    let scaled: Vec<_> = refined_pts.iter().map(|p| p * unit).collect();
    let refined_tree = KdTree::from_points(scaled.clone())?;
    let target_scaled = prep.target_tree.points();
    let mut fwd = 0.0;
    for (i, p) in scaled.iter().enumerate() {
        let (j, d2) = prep.target_tree.nearest_unchecked(p);
        fwd += d2;
        g_pts[i] += (p - target_scaled[j]) * (2.0 * weights.rec * unit / n as f64);
    }
    let mut bwd = 0.0;
    for q in target_scaled {
        let (i, d2) = refined_tree.nearest_unchecked(q);
        bwd += d2;
        g_pts[i] += (scaled[i] - q) * (2.0 * weights.rec * unit / m as f64);
    }
    let rec = fwd / n as f64 + bwd / m as f64;

    // projection
    let k = &s.camera;
    let mut proj = 0.0;
    for (i, &jj) in s.correspondence.indices().iter().enumerate() {
        let p = refined_pts[jj];
        if p.z <= 0.0 {
            return Err(Error::BehindCamera { index: jj, z: p.z });
        }
        let uv = k.project_unchecked(&p);
        let d = uv - prep.target_uv[i];
        let norm = d.norm();
        proj += norm;
        if norm > 0.0 && weights.proj != 0.0 {
            let gu = weights.proj * d / (norm * m as f64);
            let iz = 1.0 / p.z;
            g_pts[jj] += Vector3::new(
                gu.x * k.fx * iz,
                gu.y * k.fy * iz,
                -(gu.x * k.fx * p.x + gu.y * k.fy * p.y) * iz * iz,
            );
        }
    }
    proj /= m as f64;

    // attention peak terms on the coarse level
    let centers = coarse.cell_centers();
    let mut hard = 0.0;
    let mut soft = 0.0;
    let mut g_soft_uv = DMatrix::<f64>::zeros(coarse.patches(), 2);
    for (i, &jj) in s.correspondence.indices().iter().enumerate() {
        let patch = coarse.point_patch()[jj];
        hard += (prep.target_uv[i] - coarse.argmax_uv(patch)?).norm_squared();
        let su = coarse.soft_argmax_uv(patch)?;
        let d = su - prep.target_uv[i];
        soft += d.norm_squared();
        g_soft_uv[(patch, 0)] += 2.0 * weights.weight * d.x / m as f64;
        g_soft_uv[(patch, 1)] += 2.0 * weights.weight * d.y / m as f64;
    }
    hard /= m as f64;
    soft /= m as f64;

    // mask head
    let logits = mask_logits(&s.grids[1], params);
    let mut mask = 0.0;
    let mut g_logits = DVector::zeros(logits.len());
    for (c, &z) in logits.iter().enumerate() {
        let p = sigmoid(z);
        let t = s.mask_target.data()[c];
        mask += bce(p, t);
        if (MASK_EPS..=1.0 - MASK_EPS).contains(&p) {
            g_logits[c] = weights.mask * (p - t);
        }
    }

    let parts = LossParts {
        rec,
        weight: hard,
        proj,
        mask,
        ph: s.pose_terms[0],
        po: s.pose_terms[1],
    };
    let objective = weights.rec * rec + weights.weight * soft + weights.proj * proj + weights.mask * mask;
    let eval = Evaluation {
        parts,
        soft_weight: soft,
        objective,
        refined: Cloud::from_points_unchecked(refined_pts),
    };
    if !want_grad {
        return Ok((eval, None));
    }

    let mut grad = GradBuffer::new(params);
    let mut g_off = DMatrix::zeros(n, 3);
    for (i, g) in g_pts.iter().enumerate() {
        for a in 0..3 {
            g_off[(i, a)] = g[a] / cfg.coord_scale;
        }
    }
    let (g_fine, g_coarse) = decoder_backward(topo, &dec_cache, &coarse, &g_off, &mut grad);
    let mut g_weights = DMatrix::zeros(coarse.patches(), centers.len());
    for p in 0..coarse.patches() {
        for (c, uv) in centers.iter().enumerate() {
            g_weights[(p, c)] = g_soft_uv[(p, 0)] * uv.x + g_soft_uv[(p, 1)] * uv.y;
        }
    }
    attention_backward(0, &fine, &fine_cache, &s.grids[0], &g_fine, None, &mut grad);
    attention_backward(1, &coarse, &coarse_cache, &s.grids[1], &g_coarse, Some(&g_weights), &mut grad);
    grad.add_vector("mask.w", &(s.grids[1].data().transpose() * &g_logits));
    grad.add_vector("mask.b", &DVector::from_element(1, g_logits.sum()));
    Ok((eval, Some(grad.grad)))
}

/// Attention states of both levels for inspection.
pub fn attention_states(params: &FusionParams, prep: &PreparedSample) -> Result<[AttentionState; 2]> {
    let s = prep.sample;
    let t = &prep.topology;
    Ok([
        attention_forward(0, &t.levels[0], &s.grids[0], &s.global, params)?.0,
        attention_forward(1, &t.levels[1], &s.grids[1], &s.global, params)?.0,
    ])
}

//! The refinement objective: attention, projection, reconstruction, mask and
//! pose terms, and their weighted total.

use super::mask::{Mask, MaskKind};
use crate::error::{Error, Result};
use crate::fusion::AttentionState;
use crate::geom::{chamfer, Cloud};
use crate::registration::CorrespondenceMap;
use crate::CameraIntrinsics;
use nalgebra::Point3;

pub const LAMBDA_WEIGHT: f64 = 0.1;
pub const LAMBDA_PROJ: f64 = 0.01;
/// Probabilities are clamped to `[MASK_EPS, 1 - MASK_EPS]` before taking logs.
pub const MASK_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgmaxMode {
    /// Cell-center of the row maximum (row-major first on ties).
    Hard,
    /// Expected cell-center coordinate under the attention row.
    Soft,
}

fn check_correspondence(v: &Cloud<f64>, j: &CorrespondenceMap, prior_len: usize) -> Result<()> {
    if j.len() != v.len() {
        return Err(Error::shape("correspondence length", v.len(), j.len()));
    }
    if j.prior_len() != prior_len {
        return Err(Error::shape("correspondence prior size", prior_len, j.prior_len()));
    }
    Ok(())
}

/// Mean squared pixel distance between each ground-truth projection and the
/// attention peak of the coarse patch holding its corresponding prior point.
pub fn loss_weight(
    state: &AttentionState,
    v: &Cloud<f64>,
    j: &CorrespondenceMap,
    k: &CameraIntrinsics,
    mode: ArgmaxMode,
) -> Result<f64> {
    v.require_non_empty("attention loss")?;
    check_correspondence(v, j, state.point_patch().len())?;
    let uv = k.project_all(v.points())?;
    let mut acc = 0.0;
    for (i, &jj) in j.indices().iter().enumerate() {
        let patch = state.point_patch()[jj];
        let peak = match mode {
            ArgmaxMode::Hard => state.argmax_uv(patch)?,
            ArgmaxMode::Soft => state.soft_argmax_uv(patch)?,
        };
        acc += (uv[i] - peak).norm_squared();
    }
    Ok(acc / v.len() as f64)
}

/// Mean (unsquared) pixel distance between projections of each ground-truth
/// point and of its corresponding refined point.
pub fn loss_proj(v: &Cloud<f64>, refined: &Cloud<f64>, j: &CorrespondenceMap, k: &CameraIntrinsics) -> Result<f64> {
    v.require_non_empty("projection loss")?;
    check_correspondence(v, j, refined.len())?;
    let uv = k.project_all(v.points())?;
    let uv_ref = k.project_all(refined.points())?;
    let acc: f64 = j
        .indices()
        .iter()
        .enumerate()
        .map(|(i, &jj)| (uv[i] - uv_ref[jj]).norm())
        .sum();
    Ok(acc / v.len() as f64)
}

pub fn loss_rec(refined: &Cloud<f64>, v: &Cloud<f64>) -> Result<f64> {
    chamfer(refined, v)
}

/// Binary cross-entropy summed over pixels.
pub fn loss_mask(pred: &Mask, gt: &Mask) -> Result<f64> {
    pred.same_shape(gt)?;
    if pred.kind() != MaskKind::Probability {
        return Err(Error::precondition("mask loss expects a probability mask as prediction"));
    }
    if gt.kind() == MaskKind::Probability {
        return Err(Error::precondition("mask loss expects a binary ground-truth mask"));
    }
    Ok(pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &m)| bce(p, m))
        .sum())
}

#[inline]
pub(crate) fn bce(p: f64, m: f64) -> f64 {
    let p = p.clamp(MASK_EPS, 1.0 - MASK_EPS);
    -(m * p.ln() + (1.0 - m) * (1.0 - p).ln())
}

/// Squared Euclidean distance between a predicted and a ground-truth center.
pub fn loss_pose(pred: &Point3<f64>, gt: &Point3<f64>) -> f64 {
    (pred - gt).norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JointAggregation {
    #[default]
    Sum,
    Mean,
}

/// Hand-pose term over corresponding joints.
pub fn loss_pose_joints(pred: &[Point3<f64>], gt: &[Point3<f64>], agg: JointAggregation) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::shape("joint count", gt.len(), pred.len()));
    }
    let s: f64 = pred.iter().zip(gt).map(|(p, g)| loss_pose(p, g)).sum();
    Ok(match agg {
        JointAggregation::Sum => s,
        JointAggregation::Mean => s / pred.len() as f64,
    })
}

/// Unweighted loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub rec: f64,
    pub weight: f64,
    pub proj: f64,
    pub mask: f64,
    pub ph: f64,
    pub po: f64,
}

impl LossParts {
    pub fn names() -> [&'static str; 6] {
        ["rec", "weight", "proj", "mask", "ph", "po"]
    }

    pub fn values(&self) -> [f64; 6] {
        [self.rec, self.weight, self.proj, self.mask, self.ph, self.po]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub parts: LossParts,
    pub lambda_weight: f64,
    pub lambda_proj: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(parts: &LossParts, lambda_weight: f64, lambda_proj: f64) -> f64 {
        parts.rec + parts.mask + parts.ph + parts.po + lambda_weight * parts.weight + lambda_proj * parts.proj
    }
}

/// Weighted total with the standard weights (0.1 attention, 0.01 projection).
pub fn loss_total(parts: LossParts) -> Result<LossBreakdown> {
    for (name, v) in LossParts::names().iter().zip(parts.values()) {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss term '{name}' = {v}")));
        }
    }
    Ok(LossBreakdown {
        parts,
        lambda_weight: LAMBDA_WEIGHT,
        lambda_proj: LAMBDA_PROJ,
        total: LossBreakdown::combine(&parts, LAMBDA_WEIGHT, LAMBDA_PROJ),
    })
}

/// `1 − (visible + 1) / (amodal + 1)` over foreground pixel counts. A visible
/// mask that is not contained in the amodal one is logged and the rate clamped at 0.
pub fn occlusion_rate(visible: &Mask, amodal: &Mask) -> Result<f64> {
    visible.same_shape(amodal)?;
    if !visible.is_subset_of(amodal) {
        log::warn!("visible mask is not a subset of the amodal mask");
    }
    let r = 1.0 - (visible.area() as f64 + 1.0) / (amodal.area() as f64 + 1.0);
    Ok(r.max(0.0))
}

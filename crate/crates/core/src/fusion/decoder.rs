//! Coarse-to-fine decoder regressing per-point offsets from fused patch features.

use super::attention::AttentionState;
use super::config::FusionConfig;
use super::encoder::{encode_prior, interpolation_matrix, PatchFeatures};
use super::params::{FusionParams, GradBuffer};
use crate::error::{Error, Result};
use crate::geom::Cloud;
use nalgebra::{DMatrix, DVector, Point3, Vector3};

/// Patch hierarchy of one prior plus the interpolation operators between levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub levels: [PatchFeatures; 2],
    /// Coarse centers → fine centers (P1 × P2).
    pub(crate) up_fine: DMatrix<f64>,
    /// Fine centers → prior points (N × P1).
    pub(crate) up_points: DMatrix<f64>,
}

pub const INTERPOLATION_NEIGHBOURS: usize = 3;

impl Topology {
    pub fn build(prior: &Cloud<f64>, cfg: &FusionConfig) -> Result<Self> {
        let levels = encode_prior(prior, cfg)?;
        let up_fine = interpolation_matrix(&levels[0].centers, &levels[1].centers, INTERPOLATION_NEIGHBOURS)?;
        let up_points = interpolation_matrix(prior.points(), &levels[0].centers, INTERPOLATION_NEIGHBOURS)?;
        Ok(Self {
            levels,
            up_fine,
            up_points,
        })
    }
}

pub(crate) struct DecoderCache {
    e2: DMatrix<f64>,
    in1: DMatrix<f64>,
    e1: DMatrix<f64>,
    i0: DMatrix<f64>,
}

fn affine_tanh(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut a = x * w.transpose();
    for mut row in a.row_iter_mut() {
        row += b.transpose();
    }
    a.map(f64::tanh)
}

fn col_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

/// Returns per-point offsets in network units (N × 3).
pub(crate) fn decoder_forward(
    topo: &Topology,
    fine: &AttentionState,
    coarse: &AttentionState,
    params: &FusionParams,
) -> Result<(DMatrix<f64>, DecoderCache)> {
    let w2 = params.matrix("dec2.w");
    let w1 = params.matrix("dec1.w");
    if coarse.fused().ncols() != w2.ncols() {
        return Err(Error::shape("coarse fused width", w2.ncols(), coarse.fused().ncols()));
    }
    if coarse.patches() != topo.up_fine.ncols() || fine.patches() != topo.up_fine.nrows() {
        return Err(Error::shape("patch count", topo.up_fine.nrows(), fine.patches()));
    }
    let e2 = affine_tanh(coarse.fused(), &w2, &params.vector("dec2.b"));
    let i1 = &topo.up_fine * &e2;
    let hd = i1.ncols();
    let f1 = fine.fused();
    if hd + f1.ncols() != w1.ncols() {
        return Err(Error::shape("fine fused width", w1.ncols() - hd, f1.ncols()));
    }
    let mut in1 = DMatrix::zeros(f1.nrows(), hd + f1.ncols());
    in1.columns_mut(0, hd).copy_from(&i1);
    in1.columns_mut(hd, f1.ncols()).copy_from(f1);
    let e1 = affine_tanh(&in1, &w1, &params.vector("dec1.b"));
    let i0 = &topo.up_points * &e1;
    let mut off = &i0 * params.matrix("head.w").transpose();
    let hb = params.vector("head.b");
    for mut row in off.row_iter_mut() {
        row += hb.transpose();
    }
    Ok((off, DecoderCache { e2, in1, e1, i0 }))
}

pub(crate) fn apply_offsets(prior: &Cloud<f64>, off: &DMatrix<f64>, coord_scale: f64) -> Vec<Point3<f64>> {
    prior
        .points()
        .iter()
        .enumerate()
        .map(|(n, p)| p + Vector3::new(off[(n, 0)], off[(n, 1)], off[(n, 2)]) / coord_scale)
        .collect()
}

/// Refined cloud: every prior point moved by its decoded offset.
pub fn decode(
    topo: &Topology,
    fine: &AttentionState,
    coarse: &AttentionState,
    prior: &Cloud<f64>,
    params: &FusionParams,
    cfg: &FusionConfig,
) -> Result<Cloud<f64>> {
    if prior.len() != topo.up_points.nrows() {
        return Err(Error::shape("prior size", topo.up_points.nrows(), prior.len()));
    }
    let (off, _) = decoder_forward(topo, fine, coarse, params)?;
    Cloud::new(apply_offsets(prior, &off, cfg.coord_scale))
}

/// Returns the gradients on the fine and coarse fused features.
pub(crate) fn decoder_backward(
    topo: &Topology,
    cache: &DecoderCache,
    coarse: &AttentionState,
    g_off: &DMatrix<f64>,
    grad: &mut GradBuffer,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let head = grad.params.matrix("head.w");
    grad.add_matrix("head.w", &(g_off.transpose() * &cache.i0));
    grad.add_vector("head.b", &col_sums(g_off));
    let g_i0 = g_off * head;
    let g_e1 = topo.up_points.transpose() * g_i0;
    let g_pre1 = g_e1.component_mul(&cache.e1.map(|t| 1.0 - t * t));
    grad.add_matrix("dec1.w", &(g_pre1.transpose() * &cache.in1));
    grad.add_vector("dec1.b", &col_sums(&g_pre1));
    let g_in1 = &g_pre1 * grad.params.matrix("dec1.w");
    let hd = cache.e2.ncols();
    let g_i1 = g_in1.columns(0, hd).into_owned();
    let g_fine = g_in1.columns(hd, g_in1.ncols() - hd).into_owned();
    let g_e2 = topo.up_fine.transpose() * g_i1;
    let g_pre2 = g_e2.component_mul(&cache.e2.map(|t| 1.0 - t * t));
    grad.add_matrix("dec2.w", &(g_pre2.transpose() * coarse.fused()));
    grad.add_vector("dec2.b", &col_sums(&g_pre2));
    let g_coarse = &g_pre2 * grad.params.matrix("dec2.w");
    (g_fine, g_coarse)
}

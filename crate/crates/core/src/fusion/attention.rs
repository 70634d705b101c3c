//! Patch-to-grid attention.

use super::encoder::PatchFeatures;
use super::features::{cell_center, FeatureGrid, GlobalFeature};
use super::params::{FusionParams, GradBuffer};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, Point2};

/// Attention of one level: row-stochastic weights (patches × cells), the
/// attended visual features and the fused per-patch features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    weights: DMatrix<f64>,
    attended: DMatrix<f64>,
    fused: DMatrix<f64>,
    grid_h: usize,
    grid_w: usize,
    stride: f64,
    point_patch: Vec<usize>,
}

impl AttentionState {
    /// State from explicit attention weights; attended and fused features are empty.
    pub fn from_weights(
        weights: DMatrix<f64>,
        grid_h: usize,
        grid_w: usize,
        stride: f64,
        point_patch: Vec<usize>,
    ) -> Result<Self> {
        if weights.ncols() != grid_h * grid_w {
            return Err(Error::shape("attention columns", grid_h * grid_w, weights.ncols()));
        }
        if !(stride > 0.0) {
            return Err(Error::precondition("attention stride must be positive"));
        }
        for (r, row) in weights.row_iter().enumerate() {
            if row.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::precondition(format!("attention row {r} is not a distribution")));
            }
        }
        if let Some(&p) = point_patch.iter().find(|&&p| p >= weights.nrows()) {
            return Err(Error::precondition(format!("point assigned to missing patch {p}")));
        }
        let p = weights.nrows();
        Ok(Self {
            weights,
            attended: DMatrix::zeros(p, 0),
            fused: DMatrix::zeros(p, 0),
            grid_h,
            grid_w,
            stride,
            point_patch,
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn attended(&self) -> &DMatrix<f64> {
        &self.attended
    }

    pub fn fused(&self) -> &DMatrix<f64> {
        &self.fused
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.grid_h, self.grid_w)
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn point_patch(&self) -> &[usize] {
        &self.point_patch
    }

    pub fn patches(&self) -> usize {
        self.weights.nrows()
    }

    fn check_patch(&self, patch: usize) -> Result<()> {
        if patch >= self.patches() {
            return Err(Error::precondition(format!(
                "patch {patch} out of range ({} patches)",
                self.patches()
            )));
        }
        Ok(())
    }

    /// Most attended cell of a patch (row-major first on ties).
    pub fn argmax_cell(&self, patch: usize) -> Result<usize> {
        self.check_patch(patch)?;
        let row = self.weights.row(patch);
        let mut best = 0;
        for (c, &w) in row.iter().enumerate() {
            if w > row[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Pixel center of the most attended cell.
    pub fn argmax_uv(&self, patch: usize) -> Result<Point2<f64>> {
        Ok(cell_center(self.argmax_cell(patch)?, self.grid_w, self.stride))
    }

    /// Attention-weighted mean of the cell centers.
    pub fn soft_argmax_uv(&self, patch: usize) -> Result<Point2<f64>> {
        self.check_patch(patch)?;
        let mut uv = Point2::origin();
        for (c, &w) in self.weights.row(patch).iter().enumerate() {
            uv += cell_center(c, self.grid_w, self.stride).coords * w;
        }
        Ok(uv)
    }

    pub(crate) fn cell_centers(&self) -> Vec<Point2<f64>> {
        (0..self.grid_h * self.grid_w)
            .map(|c| cell_center(c, self.grid_w, self.stride))
            .collect()
    }
}

pub(crate) struct AttentionCache {
    z: DMatrix<f64>,
    h: DMatrix<f64>,
}

fn names(level: usize) -> [String; 4] {
    let l = level + 1;
    [
        format!("attn{l}.w1"),
        format!("attn{l}.b1"),
        format!("attn{l}.w2"),
        format!("attn{l}.b2"),
    ]
}

fn add_row_bias(m: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut row in m.row_iter_mut() {
        row += b.transpose();
    }
}

fn row_softmax(s: &DMatrix<f64>) -> DMatrix<f64> {
    let mut w = s.clone();
    for mut row in w.row_iter_mut() {
        let m = row.max();
        row.apply(|x| *x = (*x - m).exp());
        let z = row.sum();
        row /= z;
    }
    w
}

fn col_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

pub(crate) fn attention_forward(
    level: usize,
    patches: &PatchFeatures,
    grid: &FeatureGrid,
    global: &GlobalFeature,
    params: &FusionParams,
) -> Result<(AttentionState, AttentionCache)> {
    let [w1n, b1n, w2n, b2n] = names(level);
    let w1 = params.matrix(&w1n);
    let w2 = params.matrix(&w2n);
    let d = patches.features.ncols();
    if d + global.len() != w1.ncols() {
        return Err(Error::shape("patch + global feature width", w1.ncols(), d + global.len()));
    }
    if grid.channels() != w2.nrows() {
        return Err(Error::shape("grid channels", w2.nrows(), grid.channels()));
    }
    let p = patches.len();
    let mut z = DMatrix::zeros(p, d + global.len());
    z.columns_mut(0, d).copy_from(&patches.features);
    for r in 0..p {
        for (c, g) in global.0.iter().enumerate() {
            z[(r, d + c)] = *g;
        }
    }
    let mut a1 = &z * w1.transpose();
    add_row_bias(&mut a1, &params.vector(&b1n));
    let h = a1.map(f64::tanh);
    let mut q = &h * w2.transpose();
    add_row_bias(&mut q, &params.vector(&b2n));
    let k = grid.data();
    let weights = row_softmax(&(&q * k.transpose()));
    let attended = &weights * k;
    let c = attended.ncols();
    let mut fused = DMatrix::zeros(p, c + d);
    fused.columns_mut(0, c).copy_from(&attended);
    fused.columns_mut(c, d).copy_from(&patches.features);
    let state = AttentionState {
        weights,
        attended,
        fused,
        grid_h: grid.height(),
        grid_w: grid.width(),
        stride: grid.stride(),
        point_patch: patches.point_patch.clone(),
    };
    Ok((state, AttentionCache { z, h }))
}

/// Attends each patch over the grid cells of its level (0 = fine, 1 = coarse).
pub fn fuse(
    level: usize,
    patches: &PatchFeatures,
    grid: &FeatureGrid,
    global: &GlobalFeature,
    params: &FusionParams,
) -> Result<AttentionState> {
    if level > 1 {
        return Err(Error::precondition(format!("no fusion level {level}")));
    }
    Ok(attention_forward(level, patches, grid, global, params)?.0)
}

/// Back-propagates `g_fused` (and optionally a direct gradient on the
/// attention weights) into the level's parameters.
pub(crate) fn attention_backward(
    level: usize,
    state: &AttentionState,
    cache: &AttentionCache,
    grid: &FeatureGrid,
    g_fused: &DMatrix<f64>,
    g_weights: Option<&DMatrix<f64>>,
    grad: &mut GradBuffer,
) {
    let [w1n, b1n, w2n, b2n] = names(level);
    let k = grid.data();
    let c = k.ncols();
    let g_att = g_fused.columns(0, c).into_owned();
    let mut g_w = &g_att * k.transpose();
    if let Some(extra) = g_weights {
        g_w += extra;
    }
    let w = &state.weights;
    let mut g_s = w.component_mul(&g_w);
    for r in 0..g_s.nrows() {
        let dot = g_s.row(r).sum();
        for col in 0..g_s.ncols() {
            g_s[(r, col)] -= w[(r, col)] * dot;
        }
    }
    let g_q = &g_s * k;
    grad.add_matrix(&w2n, &(g_q.transpose() * &cache.h));
    grad.add_vector(&b2n, &col_sums(&g_q));
    let w2 = grad.params.matrix(&w2n);
    let g_h = &g_q * w2;
    let g_a1 = g_h.component_mul(&cache.h.map(|t| 1.0 - t * t));
    grad.add_matrix(&w1n, &(g_a1.transpose() * &cache.z));
    grad.add_vector(&b1n, &col_sums(&g_a1));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_tie_breaks_row_major() {
        let w = DMatrix::from_row_slice(1, 4, &[0.25; 4]);
        let s = AttentionState::from_weights(w, 2, 2, 4.0, vec![0]).unwrap();
        assert_eq!(s.argmax_cell(0).unwrap(), 0);
        assert_eq!(s.argmax_uv(0).unwrap(), Point2::new(2.0, 2.0));
        assert_eq!(s.soft_argmax_uv(0).unwrap(), Point2::new(4.0, 4.0));
        assert!(s.argmax_uv(1).is_err());
    }

    #[test]
    fn rejects_non_distributions() {
        let w = DMatrix::from_row_slice(1, 4, &[0.5, 0.5, 0.5, 0.0]);
        assert!(AttentionState::from_weights(w, 2, 2, 4.0, vec![0]).is_err());
        let w = DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.0]);
        assert!(AttentionState::from_weights(w, 2, 2, 4.0, vec![0]).is_err());
    }

    #[test]
    fn softmax_rows_are_stable() {
        let s = DMatrix::from_row_slice(2, 3, &[1000.0, 1000.0, 0.0, -5.0, 0.0, 5.0]);
        let w = row_softmax(&s);
        assert!((w[(0, 0)] - 0.5).abs() < 1e-12);
        for r in 0..2 {
            assert!((w.row(r).sum() - 1.0).abs() < 1e-12);
        }
    }
}

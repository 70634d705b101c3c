use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, Point2};

/// Image-aligned feature grid; row `r * width + c` holds the features of cell (r, c).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    stride: f64,
    data: DMatrix<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, stride: f64, data: DMatrix<f64>) -> Result<Self> {
        if height == 0 || width == 0 || !(stride > 0.0) {
            return Err(Error::precondition("feature grid needs positive size and stride"));
        }
        if data.nrows() != height * width {
            return Err(Error::shape("feature grid rows", height * width, data.nrows()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature grid".into()));
        }
        Ok(Self { height, width, stride, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn cells(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Pixel center of a cell (u = column, v = row).
    pub fn cell_center(&self, cell: usize) -> Point2<f64> {
        cell_center(cell, self.width, self.stride)
    }

    /// Mean over cells.
    pub fn mean(&self) -> GlobalFeature {
        let mut m = DVector::zeros(self.channels());
        for r in self.data.row_iter() {
            m += r.transpose();
        }
        GlobalFeature(m / self.cells() as f64)
    }
}

pub(crate) fn cell_center(cell: usize, width: usize, stride: f64) -> Point2<f64> {
    let (r, c) = (cell / width, cell % width);
    Point2::new((c as f64 + 0.5) * stride, (r as f64 + 0.5) * stride)
}

/// Image-level descriptor shared by every patch query.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFeature(pub DVector<f64>);

impl GlobalFeature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

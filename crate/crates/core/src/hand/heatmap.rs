use crate::error::{Error, Result};
use crate::CameraIntrinsics;
use nalgebra::Point3;

/// Per-channel activation grids with companion depth grids, stored
/// channel-major then row-major. Pixel (row, col) sits at u = col, v = row.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointHeatmaps {
    channels: usize,
    height: usize,
    width: usize,
    activation: Vec<f64>,
    depth: Vec<f64>,
}

impl KeypointHeatmaps {
    pub fn new(channels: usize, height: usize, width: usize, activation: Vec<f64>, depth: Vec<f64>) -> Result<Self> {
        let n = channels * height * width;
        if n == 0 {
            return Err(Error::precondition("heatmaps need at least one channel and pixel"));
        }
        if activation.len() != n {
            return Err(Error::shape("activation values", n, activation.len()));
        }
        if depth.len() != n {
            return Err(Error::shape("depth values", n, depth.len()));
        }
        if activation.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::precondition("activations must be finite and non-negative"));
        }
        if depth.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("heatmap depth".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            activation,
            depth,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn activation(&self) -> &[f64] {
        &self.activation
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    fn plane(&self, c: usize) -> std::ops::Range<usize> {
        let n = self.height * self.width;
        c * n..(c + 1) * n
    }

    pub fn activation_at(&self, c: usize, row: usize, col: usize) -> f64 {
        self.activation[c * self.height * self.width + row * self.width + col]
    }

    pub fn depth_at(&self, c: usize, row: usize, col: usize) -> f64 {
        self.depth[c * self.height * self.width + row * self.width + col]
    }

    /// (row, col) of the channel maximum, row-major first on ties.
    pub fn argmax(&self, c: usize) -> (usize, usize) {
        let plane = &self.activation[self.plane(c)];
        let mut best = 0;
        for (i, &a) in plane.iter().enumerate() {
            if a > plane[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }
}

/// One 3D point per channel: the depth-grid value at the activation maximum,
/// unprojected through `k` (which must describe the heatmap raster).
pub fn keypoints_from_heatmaps(h: &KeypointHeatmaps, k: &CameraIntrinsics) -> Result<Vec<Point3<f64>>> {
    (0..h.channels)
        .map(|c| {
            let (row, col) = h.argmax(c);
            let d = h.depth_at(c, row, col);
            if !(d > 0.0) {
                return Err(Error::precondition(format!(
                    "joint {c}: non-positive depth {d} at heatmap maximum ({row}, {col})"
                )));
            }
            k.unproject(col as f64, row as f64, d)
        })
        .collect()
}

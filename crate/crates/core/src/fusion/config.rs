use crate::error::{Error, Result};

/// One level of the patch/grid hierarchy. Level 1 is the finer one.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelConfig {
    pub patches: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    /// Image pixels per grid cell.
    pub stride: f64,
    /// Visual feature channels of this level's grid.
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub levels: [LevelConfig; 2],
    /// Max-pooled channels produced by the fixed point encoder.
    pub encoder_dim: usize,
    pub attention_hidden: usize,
    pub decoder_hidden: usize,
    /// Multiplier applied to metric coordinates before they enter the network.
    pub coord_scale: f64,
    /// Multiplier applied to normalized ray coordinates (x/z, y/z).
    pub ray_scale: f64,
    /// Clouds are multiplied by this before reconstruction and pose terms
    /// (1000 scores them in millimeters, matching the evaluation reports).
    pub loss_unit: f64,
    pub encoder_seed: u64,
    pub init_seed: u64,
}

/// Number of geometric channels appended to the pooled encoder output:
/// patch center relative to the prior centroid (3) and its ray direction (2).
pub const GEOMETRIC_EXTRA: usize = 5;

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            levels: [
                LevelConfig {
                    patches: 64,
                    grid_h: 32,
                    grid_w: 32,
                    stride: 8.0,
                    channels: 16,
                },
                LevelConfig {
                    patches: 16,
                    grid_h: 16,
                    grid_w: 16,
                    stride: 16.0,
                    channels: 16,
                },
            ],
            encoder_dim: 16,
            attention_hidden: 32,
            decoder_hidden: 32,
            coord_scale: 10.0,
            ray_scale: 20.0,
            loss_unit: 1000.0,
            encoder_seed: 7,
            init_seed: 11,
        }
    }
}

impl FusionConfig {
    /// Minimal instance used for gradient checks: 4 and 2 patches over 4×4 grids.
    pub fn tiny() -> Self {
        let level = |patches| LevelConfig {
            patches,
            grid_h: 4,
            grid_w: 4,
            stride: 8.0,
            channels: 5,
        };
        Self {
            levels: [level(4), level(2)],
            encoder_dim: 4,
            attention_hidden: 6,
            decoder_hidden: 5,
            ..Self::default()
        }
    }

    pub fn geometric_dim(&self) -> usize {
        self.encoder_dim + GEOMETRIC_EXTRA
    }

    /// Global feature width (average of the level-1 grid).
    pub fn global_dim(&self) -> usize {
        self.levels[0].channels
    }

    pub fn fused_dim(&self, level: usize) -> usize {
        self.levels[level].channels + self.geometric_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (i, l) in self.levels.iter().enumerate() {
            if l.patches == 0 || l.grid_h == 0 || l.grid_w == 0 || l.channels == 0 {
                errs.push(format!("fusion level {}: sizes must be positive", i + 1));
            }
            if !(l.stride > 0.0) {
                errs.push(format!("fusion level {}: stride must be positive", i + 1));
            }
        }
        if self.levels[1].patches > self.levels[0].patches {
            errs.push("fusion: coarse level cannot have more patches than the fine level".into());
        }
        if self.encoder_dim == 0 || self.attention_hidden == 0 || self.decoder_hidden == 0 {
            errs.push("fusion: layer widths must be positive".into());
        }
        for (name, v) in [("coord_scale", self.coord_scale), ("ray_scale", self.ray_scale), ("loss_unit", self.loss_unit)] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("fusion: {name} must be positive"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

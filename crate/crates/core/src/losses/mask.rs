use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Amodal,
    Visible,
    /// Per-pixel foreground probabilities in `[0, 1]`.
    Probability,
}

/// Row-major `height × width` raster. Binary kinds hold only 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    kind: MaskKind,
    data: Vec<f64>,
}

impl Mask {
    pub fn new(width: usize, height: usize, kind: MaskKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape("mask data", width * height, data.len()));
        }
        let bad = match kind {
            MaskKind::Probability => data.iter().position(|v| !(0.0..=1.0).contains(v)),
            _ => data.iter().position(|&v| v != 0.0 && v != 1.0),
        };
        if let Some(i) = bad {
            return Err(Error::precondition(format!(
                "{kind:?} mask value {} at pixel {i} out of range",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            kind,
            data,
        })
    }

    pub fn empty(width: usize, height: usize, kind: MaskKind) -> Self {
        Self {
            width,
            height,
            kind,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_bools(width: usize, height: usize, kind: MaskKind, bits: &[bool]) -> Result<Self> {
        Self::new(width, height, kind, bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn is_foreground(&self, row: usize, col: usize) -> bool {
        self.get(row, col) >= 0.5
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v >= 0.5).count()
    }

    pub fn same_shape(&self, other: &Mask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape(
                "mask size",
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    /// Every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.same_shape(other).is_ok()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a < 0.5 || b >= 0.5)
    }

    /// Block-downsampled binary mask: a cell is foreground when at least half
    /// of its source pixels are.
    pub fn downsample(&self, out_w: usize, out_h: usize) -> Result<Mask> {
        if out_w == 0 || out_h == 0 || self.width % out_w != 0 || self.height % out_h != 0 {
            return Err(Error::shape(
                "mask downsample",
                format!("divisor of {}x{}", self.width, self.height),
                format!("{out_w}x{out_h}"),
            ));
        }
        let (bw, bh) = (self.width / out_w, self.height / out_h);
        let mut out = Mask::empty(out_w, out_h, self.kind);
        for r in 0..out_h {
            for c in 0..out_w {
                let mut on = 0;
                for y in 0..bh {
                    for x in 0..bw {
                        if self.is_foreground(r * bh + y, c * bw + x) {
                            on += 1;
                        }
                    }
                }
                let v = if 2 * on >= bw * bh { 1.0 } else { 0.0 };
                out.set(r, c, v);
            }
        }
        Ok(out)
    }
}

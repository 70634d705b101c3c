//! Trainable parameters as named row-major tensors over one flat buffer.

use super::config::FusionConfig;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    specs: Vec<TensorSpec>,
    values: Vec<f64>,
}

/// `(name, rows, cols)`; biases are `cols = 1` and stored with shape `[rows]`.
fn layout(cfg: &FusionConfig) -> Vec<(String, usize, usize)> {
    let d = cfg.geometric_dim();
    let g = cfg.global_dim();
    let (ha, hd) = (cfg.attention_hidden, cfg.decoder_hidden);
    let (c1, c2) = (cfg.levels[0].channels, cfg.levels[1].channels);
    let mut out = Vec::new();
    for (l, c) in [(1, c1), (2, c2)] {
        out.push((format!("attn{l}.w1"), ha, d + g));
        out.push((format!("attn{l}.b1"), ha, 1));
        out.push((format!("attn{l}.w2"), c, ha));
        out.push((format!("attn{l}.b2"), c, 1));
    }
    out.push(("dec2.w".into(), hd, c2 + d));
    out.push(("dec2.b".into(), hd, 1));
    out.push(("dec1.w".into(), hd, hd + c1 + d));
    out.push(("dec1.b".into(), hd, 1));
    out.push(("head.w".into(), 3, hd));
    out.push(("head.b".into(), 3, 1));
    out.push(("mask.w".into(), 1, c2));
    out.push(("mask.b".into(), 1, 1));
    out
}

impl FusionParams {
    /// Zero-filled parameters with the shapes implied by `cfg`.
    pub fn zeros(cfg: &FusionConfig) -> Self {
        let mut specs = Vec::new();
        let mut offset = 0;
        for (name, r, c) in layout(cfg) {
            let is_bias = name.rsplit('.').next().is_some_and(|t| t.starts_with('b'));
            let shape = if is_bias {
                vec![r]
            } else {
                vec![r, c]
            };
            let spec = TensorSpec { name, shape, offset };
            offset += spec.len();
            specs.push(spec);
        }
        Self {
            values: vec![0.0; offset],
            specs,
        }
    }

    /// Seeded initialization: weights ~ N(0, 1/fan_in), biases zero, and a zero
    /// regression head so that the initial refinement is the identity.
    pub fn init(cfg: &FusionConfig) -> Self {
        let mut p = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
        for spec in p.specs.clone() {
            if spec.shape.len() != 2 || spec.name.starts_with("head") {
                continue;
            }
            let std = (1.0 / spec.shape[1] as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("valid std");
            for v in &mut p.values[spec.offset..spec.offset + spec.len()] {
                *v = normal.sample(&mut rng);
            }
        }
        p
    }

    /// Builds from explicit tensors, checking names and shapes against `cfg`.
    pub fn from_tensors(cfg: &FusionConfig, tensors: &[(String, Vec<usize>, Vec<f64>)]) -> Result<Self> {
        let mut p = Self::zeros(cfg);
        for spec in p.specs.clone() {
            let (_, shape, data) = tensors
                .iter()
                .find(|(n, _, _)| *n == spec.name)
                .ok_or_else(|| Error::precondition(format!("missing parameter tensor '{}'", spec.name)))?;
            if *shape != spec.shape || data.len() != spec.len() {
                return Err(Error::shape(
                    format!("parameter tensor '{}'", spec.name),
                    format!("{:?}", spec.shape),
                    format!("{shape:?}"),
                ));
            }
            p.values[spec.offset..spec.offset + spec.len()].copy_from_slice(data);
        }
        if let Some((n, _, _)) = tensors.iter().find(|(n, _, _)| p.spec(n).is_none()) {
            return Err(Error::precondition(format!("unexpected parameter tensor '{n}'")));
        }
        if let Some(i) = p.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter value {i}")));
        }
        Ok(p)
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spec(&self, name: &str) -> Option<&TensorSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn slice(&self, name: &str) -> &[f64] {
        let s = self.spec(name).unwrap_or_else(|| panic!("unknown tensor {name}"));
        &self.values[s.offset..s.offset + s.len()]
    }

    pub fn slice_mut(&mut self, name: &str) -> &mut [f64] {
        let s = self.spec(name).unwrap_or_else(|| panic!("unknown tensor {name}")).clone();
        &mut self.values[s.offset..s.offset + s.len()]
    }

    pub fn matrix(&self, name: &str) -> DMatrix<f64> {
        let s = self.spec(name).unwrap_or_else(|| panic!("unknown tensor {name}"));
        let (r, c) = (s.shape[0], s.shape.get(1).copied().unwrap_or(1));
        DMatrix::from_row_slice(r, c, self.slice(name))
    }

    pub fn vector(&self, name: &str) -> DVector<f64> {
        DVector::from_column_slice(self.slice(name))
    }

    /// Flags every scalar belonging to a tensor whose name starts with `prefix`.
    pub fn mask_for_prefix(&self, prefix: &str) -> Vec<bool> {
        let mut m = vec![false; self.values.len()];
        for s in self.specs.iter().filter(|s| s.name.starts_with(prefix)) {
            m[s.offset..s.offset + s.len()].iter_mut().for_each(|b| *b = true);
        }
        m
    }
}

/// Accumulates gradients into a flat buffer laid out like [`FusionParams`].
pub(crate) struct GradBuffer<'a> {
    pub params: &'a FusionParams,
    pub grad: Vec<f64>,
}

impl<'a> GradBuffer<'a> {
    pub fn new(params: &'a FusionParams) -> Self {
        Self {
            params,
            grad: vec![0.0; params.len()],
        }
    }

    pub fn add_matrix(&mut self, name: &str, g: &DMatrix<f64>) {
        let s = self.params.spec(name).expect("known tensor");
        let cols = s.shape.get(1).copied().unwrap_or(1);
        debug_assert_eq!((g.nrows(), g.ncols()), (s.shape[0], cols));
        for r in 0..g.nrows() {
            for c in 0..cols {
                self.grad[s.offset + r * cols + c] += g[(r, c)];
            }
        }
    }

    pub fn add_vector(&mut self, name: &str, g: &DVector<f64>) {
        let s = self.params.spec(name).expect("known tensor");
        debug_assert_eq!(g.len(), s.len());
        for (i, v) in g.iter().enumerate() {
            self.grad[s.offset + i] += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous_and_head_starts_at_zero() {
        let cfg = FusionConfig::default();
        let p = FusionParams::init(&cfg);
        let mut off = 0;
        for s in p.specs() {
            assert_eq!(s.offset, off);
            off += s.len();
        }
        assert_eq!(off, p.len());
        assert!(p.slice("head.w").iter().all(|&v| v == 0.0));
        assert!(p.slice("attn1.w1").iter().any(|&v| v != 0.0));
        assert_eq!(p, FusionParams::init(&cfg));
    }

    #[test]
    fn from_tensors_validates() {
        let cfg = FusionConfig::tiny();
        let p = FusionParams::init(&cfg);
        let tensors: Vec<_> = p
            .specs()
            .iter()
            .map(|s| (s.name.clone(), s.shape.clone(), p.slice(&s.name).to_vec()))
            .collect();
        assert_eq!(FusionParams::from_tensors(&cfg, &tensors).unwrap(), p);
        let mut bad = tensors.clone();
        bad[0].1 = vec![1, 1];
        assert!(FusionParams::from_tensors(&cfg, &bad).is_err());
        assert!(FusionParams::from_tensors(&cfg, &tensors[1..]).is_err());
    }

    #[test]
    fn matrix_view_is_row_major() {
        let cfg = FusionConfig::tiny();
        let mut p = FusionParams::zeros(&cfg);
        let n = p.slice("head.w").len();
        p.slice_mut("head.w").copy_from_slice(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
        let m = p.matrix("head.w");
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(1, 0)], cfg.decoder_hidden as f64);
    }
}

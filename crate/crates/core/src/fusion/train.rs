//! Adam training of the refiner, with an optional reconstruction-only fine-tune stage.

use super::config::FusionConfig;
use super::model::{evaluate, ObjectiveWeights, PreparedSample, RefinerSample};
use super::params::FusionParams;
use crate::error::{Error, Result};
use crate::losses::{loss_total, LossBreakdown, LossParts};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub finetune_epochs: usize,
    pub finetune_learning_rate: f64,
    /// Attention parameters stay fixed during fine-tuning.
    pub freeze_attention: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-2,
            batch_size: 4,
            finetune_epochs: 0,
            finetune_learning_rate: 1e-3,
            freeze_attention: true,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.batch_size == 0 {
            errs.push("train: batch_size must be positive".to_string());
        }
        for (n, v) in [("learning_rate", self.learning_rate), ("finetune_learning_rate", self.finetune_learning_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("train: {n} must be a non-negative number"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            errs.push("train: Adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            errs.push("train: adam_eps must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Main,
    FineTune,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Stage,
    /// Mean of the per-sample terms seen during the epoch.
    pub breakdown: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub params: FusionParams,
    pub trace: Vec<EpochRecord>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64, frozen: Option<&[bool]>, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for k in 0..x.len() {
            if frozen.is_some_and(|f| f[k]) {
                continue;
            }
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g[k];
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            x[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + cfg.adam_eps);
        }
    }
}

fn mean_parts(parts: &[LossParts]) -> LossParts {
    let n = parts.len() as f64;
    let mut acc = [0.0; 6];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += v;
        }
    }
    LossParts {
        rec: acc[0] / n,
        weight: acc[1] / n,
        proj: acc[2] / n,
        mask: acc[3] / n,
        ph: acc[4] / n,
        po: acc[5] / n,
    }
}

/// Trains from `init` (or the seeded initialization). Shuffling and batch
/// reduction are deterministic for a given seed regardless of thread count.
pub fn train_refiner(
    samples: &[RefinerSample],
    cfg: &FusionConfig,
    train: &TrainConfig,
    init: Option<FusionParams>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    train.validate()?;
    if samples.is_empty() {
        return Err(Error::precondition("training needs at least one sample"));
    }
    let prepared = samples
        .par_iter()
        .map(|s| PreparedSample::new(s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut params = init.unwrap_or_else(|| FusionParams::init(cfg));
    if params.len() != FusionParams::zeros(cfg).len() {
        return Err(Error::shape("parameter count", FusionParams::zeros(cfg).len(), params.len()));
    }
    let frozen = params.mask_for_prefix("attn");
    let mut adam = Adam {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::with_capacity(train.epochs + train.finetune_epochs);
    for epoch in 0..train.epochs + train.finetune_epochs {
        let (stage, weights, lr, freeze) = if epoch < train.epochs {
            (Stage::Main, ObjectiveWeights::total(), train.learning_rate, None)
        } else {
            let f = train.freeze_attention.then_some(frozen.as_slice());
            (Stage::FineTune, ObjectiveWeights::rec_only(), train.finetune_learning_rate, f)
        };
        order.shuffle(&mut rng);
        let mut seen = vec![LossParts::default(); samples.len()];
        for batch in order.chunks(train.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| evaluate(&params, cfg, &prepared[i], weights, true))
                .collect::<Vec<_>>();
            let mut g = vec![0.0; params.len()];
            for (&i, r) in batch.iter().zip(results) {
                let (eval, grad) = r.map_err(|e| Error::Divergence {
                    epoch,
                    detail: format!("sample '{}': {e}", samples[i].id),
                })?;
                seen[i] = eval.parts;
                for (a, b) in g.iter_mut().zip(grad.expect("gradient requested")) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            g.iter_mut().for_each(|v| *v *= inv);
            if let Some(k) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite gradient at parameter {k}"),
                });
            }
            adam.step(params.values_mut(), &g, lr, freeze, train);
        }
        let breakdown = loss_total(mean_parts(&seen)).map_err(|e| Error::Divergence {
            epoch,
            detail: e.to_string(),
        })?;
        log::debug!("epoch {epoch} {stage:?} total {:.6}", breakdown.total);
        trace.push(EpochRecord { epoch, stage, breakdown });
    }
    Ok(TrainOutput { params, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{random_sample, FusionConfig};

    fn data(cfg: &FusionConfig) -> Vec<RefinerSample> {
        (0..4).map(|s| random_sample(cfg, 16, s).unwrap()).collect()
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let cfg = FusionConfig::tiny();
        let train = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            finetune_epochs: 2,
            finetune_learning_rate: 0.0,
            batch_size: 3,
            ..Default::default()
        };
        let out = train_refiner(&data(&cfg), &cfg, &train, None).unwrap();
        assert_eq!(out.params, FusionParams::init(&cfg));
        assert_eq!(out.trace.len(), 5);
        let first = out.trace[0].breakdown.total;
        assert!(out.trace.iter().all(|r| r.breakdown.total == first));
        assert_eq!(out.trace[4].stage, Stage::FineTune);
    }

    #[test]
    fn training_is_deterministic_and_reduces_the_loss() {
        let cfg = FusionConfig::tiny();
        let train = TrainConfig {
            epochs: 30,
            learning_rate: 1e-2,
            batch_size: 2,
            seed: 5,
            ..Default::default()
        };
        let a = train_refiner(&data(&cfg), &cfg, &train, None).unwrap();
        let b = train_refiner(&data(&cfg), &cfg, &train, None).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.last().unwrap().breakdown.total < a.trace[0].breakdown.total);
    }

    #[test]
    fn finetune_freezes_attention() {
        let cfg = FusionConfig::tiny();
        let train = TrainConfig {
            epochs: 0,
            finetune_epochs: 3,
            finetune_learning_rate: 1e-2,
            ..Default::default()
        };
        let init = FusionParams::init(&cfg);
        let out = train_refiner(&data(&cfg), &cfg, &train, Some(init.clone())).unwrap();
        assert_eq!(out.params.slice("attn1.w1"), init.slice("attn1.w1"));
        assert_eq!(out.params.slice("attn2.b2"), init.slice("attn2.b2"));
        assert_ne!(out.params.slice("head.w"), init.slice("head.w"));
    }

    #[test]
    fn exploding_learning_rate_reports_the_epoch() {
        let cfg = FusionConfig::tiny();
        let train = TrainConfig {
            epochs: 50,
            learning_rate: 1e300,
            ..Default::default()
        };
        match train_refiner(&data(&cfg), &cfg, &train, None) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch < 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = FusionConfig::tiny();
        let train = TrainConfig {
            batch_size: 0,
            learning_rate: -1.0,
            ..Default::default()
        };
        match train_refiner(&data(&cfg), &cfg, &train, None) {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}

//! Per-sample reconstruction metrics, aggregates and the occlusion-decile study.

use crate::error::{Error, Result};
use crate::geom::{chamfer, precision_recall, Cloud};
use rayon::prelude::*;

/// Clouds are converted from meters to millimeters before scoring.
pub const METERS_TO_MM: f64 = 1000.0;

#[derive(Debug, Clone)]
pub struct EvalSample {
    pub id: String,
    pub pred_object: Cloud<f64>,
    pub gt_object: Cloud<f64>,
    pub pred_hand: Cloud<f64>,
    pub gt_hand: Cloud<f64>,
    pub occlusion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Object F-score thresholds in millimeters.
    pub object_thresholds_mm: Vec<f64>,
    /// Hand F-score thresholds in millimeters.
    pub hand_thresholds_mm: Vec<f64>,
    /// Subtract each cloud's centroid before scoring.
    pub centered: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            object_thresholds_mm: vec![5.0, 10.0],
            hand_thresholds_mm: vec![1.0, 5.0],
            centered: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub id: String,
    /// Chamfer distance of mm-scaled clouds (mm², squared-distance convention).
    pub cd_object: f64,
    pub fs_object: Vec<f64>,
    pub cd_hand: f64,
    pub fs_hand: Vec<f64>,
    pub occlusion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub median_cd_object: f64,
    pub median_cd_hand: f64,
    /// Mean over samples, one per object threshold.
    pub mean_fs_object: Vec<f64>,
    pub mean_fs_hand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub object_thresholds_mm: Vec<f64>,
    pub hand_thresholds_mm: Vec<f64>,
    pub centered: bool,
    pub samples: Vec<SampleMetrics>,
    pub aggregate: Aggregate,
}

/// Median with the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::precondition("median of an empty set"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn prepare(c: &Cloud<f64>, centered: bool) -> Cloud<f64> {
    let c = if centered { c.centered() } else { c.clone() };
    c.scaled(METERS_TO_MM)
}

fn score_pair(pred: &Cloud<f64>, gt: &Cloud<f64>, thresholds: &[f64], centered: bool) -> Result<(f64, Vec<f64>)> {
    let p = prepare(pred, centered);
    let g = prepare(gt, centered);
    let cd = chamfer(&p, &g)?;
    let fs = thresholds
        .iter()
        .map(|&t| precision_recall(&p, &g, t).map(|pr| pr.f_score()))
        .collect::<Result<Vec<_>>>()?;
    Ok((cd, fs))
}

pub fn score_sample(s: &EvalSample, opts: &EvalOptions) -> Result<SampleMetrics> {
    let (cd_object, fs_object) = score_pair(&s.pred_object, &s.gt_object, &opts.object_thresholds_mm, opts.centered)?;
    let (cd_hand, fs_hand) = score_pair(&s.pred_hand, &s.gt_hand, &opts.hand_thresholds_mm, opts.centered)?;
    Ok(SampleMetrics {
        id: s.id.clone(),
        cd_object,
        fs_object,
        cd_hand,
        fs_hand,
        occlusion: s.occlusion,
    })
}

pub fn aggregate(samples: &[SampleMetrics], n_obj: usize, n_hand: usize) -> Result<Aggregate> {
    let cd_o: Vec<f64> = samples.iter().map(|s| s.cd_object).collect();
    let cd_h: Vec<f64> = samples.iter().map(|s| s.cd_hand).collect();
    Ok(Aggregate {
        median_cd_object: median(&cd_o)?,
        median_cd_hand: median(&cd_h)?,
        mean_fs_object: (0..n_obj).map(|t| mean(samples.iter().map(|s| s.fs_object[t]))).collect(),
        mean_fs_hand: (0..n_hand).map(|t| mean(samples.iter().map(|s| s.fs_hand[t]))).collect(),
    })
}

/// Scores every sample (in parallel) and aggregates in sample order.
pub fn evaluate(samples: &[EvalSample], opts: &EvalOptions) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::precondition("evaluation needs at least one sample"));
    }
    let per: Vec<SampleMetrics> = samples
        .par_iter()
        .map(|s| score_sample(s, opts))
        .collect::<Result<_>>()?;
    let aggregate = aggregate(&per, opts.object_thresholds_mm.len(), opts.hand_thresholds_mm.len())?;
    Ok(MetricsReport {
        object_thresholds_mm: opts.object_thresholds_mm.clone(),
        hand_thresholds_mm: opts.hand_thresholds_mm.clone(),
        centered: opts.centered,
        samples: per,
        aggregate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionBin {
    pub min_rate: f64,
    pub max_rate: f64,
    pub count: usize,
    pub median_cd: f64,
}

/// Sorts by occlusion rate (stable), splits into 10 equal-count groups with the
/// remainder going to the earliest groups, and reports each group's median CD.
pub fn occlusion_binned_report(rates: &[f64], cds: &[f64]) -> Result<Vec<OcclusionBin>> {
    const BINS: usize = 10;
    if rates.len() != cds.len() {
        return Err(Error::shape("occlusion report inputs", rates.len(), cds.len()));
    }
    if rates.len() < BINS {
        return Err(Error::precondition(format!(
            "occlusion report needs at least {BINS} samples, got {}",
            rates.len()
        )));
    }
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]));
    let n = rates.len();
    let (base, extra) = (n / BINS, n % BINS);
    let mut bins = Vec::with_capacity(BINS);
    let mut at = 0;
    for b in 0..BINS {
        let size = base + usize::from(b < extra);
        let group = &order[at..at + size];
        at += size;
        let cd: Vec<f64> = group.iter().map(|&i| cds[i]).collect();
        bins.push(OcclusionBin {
            min_rate: rates[group[0]],
            max_rate: rates[group[size - 1]],
            count: size,
            median_cd: median(&cd)?,
        });
    }
    Ok(bins)
}

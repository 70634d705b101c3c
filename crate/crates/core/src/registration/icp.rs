//! Iterative closest point with similarity fitting and an octahedral restart grid.

use super::fit::best_fit_similarity;
use crate::error::{Error, Result};
use crate::geom::{Cloud, KdTree, Similarity};
use crate::scalar::Real;
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct IcpOptions<T: Real> {
    pub max_iterations: usize,
    /// Stop once the mean squared error drops by less than this (squared input units).
    pub convergence_eps: T,
    pub estimate_scale: bool,
    pub initial: Similarity<T>,
    /// Also start from the 24 octahedral rotations about the centroids and keep
    /// the run with the lowest final error.
    pub restart_grid: bool,
}

impl<T: Real> Default for IcpOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_eps: T::lit(1e-10),
            estimate_scale: true,
            initial: Similarity::identity(),
            restart_grid: true,
        }
    }
}

impl<T: Real> IcpOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::precondition("ICP max_iterations must be at least 1"));
        }
        if !(self.convergence_eps > T::zero()) {
            return Err(Error::precondition("ICP convergence_eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult<T: Real> {
    pub transform: Similarity<T>,
    /// Mean over target points of the squared distance to the nearest transformed prior point.
    pub mse: T,
    /// Error after each evaluation of the winning run; `trace[0]` is the initial error.
    pub trace: Vec<T>,
    pub iterations: usize,
    /// 0 for `opts.initial`, `1..=24` for grid starts.
    pub start: usize,
}

/// The 24 proper rotations mapping the coordinate axes onto themselves, identity first.
pub fn octahedral_rotations<T: Real>() -> Vec<Matrix3<T>> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in PERMS {
        for signs in 0..8u8 {
            let mut m = Matrix3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                m[(row, col)] = if signs & (1 << row) != 0 { -T::one() } else { T::one() };
            }
            if m.determinant() > T::zero() {
                out.push(m);
            }
        }
    }
    out
}

fn correspondences<T: Real>(moved: &Cloud<T>, target: &Cloud<T>) -> Result<(Vec<(usize, usize)>, T)> {
    let tree = KdTree::build(moved)?;
    let mut sum = T::zero();
    let pairs = target
        .points()
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let (i, d) = tree.nearest_unchecked(q);
            sum += d;
            (i, j)
        })
        .collect();
    Ok((pairs, sum / T::from_usize_lossy(target.len())))
}

fn run_from<T: Real>(
    prior: &Cloud<T>,
    target: &Cloud<T>,
    init: Similarity<T>,
    opts: &IcpOptions<T>,
    start: usize,
) -> Result<IcpResult<T>> {
    let mut transform = init;
    let (mut pairs, mut mse) = correspondences(&transform.apply(prior), target)?;
    let mut trace = vec![mse];
    let mut iterations = 0;
    while iterations < opts.max_iterations && mse > T::zero() {
        let next = best_fit_similarity(prior, target, &pairs, opts.estimate_scale)?;
        let (next_pairs, next_mse) = correspondences(&next.apply(prior), target)?;
        iterations += 1;
        trace.push(next_mse);
        let improvement = mse - next_mse;
        transform = next;
        pairs = next_pairs;
        mse = next_mse;
        if improvement < opts.convergence_eps {
            break;
        }
    }
    Ok(IcpResult {
        transform,
        mse,
        trace,
        iterations,
        start,
    })
}

fn rms_radius<T: Real>(cloud: &Cloud<T>) -> T {
    let c = cloud.centroid();
    let s: T = cloud.points().iter().fold(T::zero(), |acc, p| acc + (p - c).norm_squared());
    (s / T::from_usize_lossy(cloud.len())).sqrt()
}

/// Aligns `prior` to `target`: alternates nearest-neighbor matching (each
/// target point to the transformed prior) with a closed-form similarity fit.
pub fn icp_align<T: Real>(prior: &Cloud<T>, target: &Cloud<T>, opts: &IcpOptions<T>) -> Result<IcpResult<T>> {
    opts.validate()?;
    if prior.len() < 3 || target.len() < 3 {
        return Err(Error::precondition(format!(
            "ICP needs at least 3 points per cloud (prior {}, target {})",
            prior.len(),
            target.len()
        )));
    }
    let mut starts = vec![opts.initial];
    if opts.restart_grid {
        let (mp, mt) = (prior.centroid(), target.centroid());
        let s0 = if opts.estimate_scale {
            let rp = rms_radius(prior);
            if rp > T::zero() {
                rms_radius(target) / rp
            } else {
                T::one()
            }
        } else {
            T::one()
        };
        for r in octahedral_rotations::<T>() {
            let t: Vector3<T> = mt.coords - r * mp.coords * s0;
            starts.push(Similarity::new(r, t, s0)?);
        }
    }
    let runs: Vec<Result<IcpResult<T>>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(k, init)| run_from(prior, target, init, opts, k))
        .collect();

    let mut best: Option<IcpResult<T>> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.mse < b.mse) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}

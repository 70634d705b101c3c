//! Jacobian of the joint positions and a damped least-squares IK solver.

use super::skeleton::{
    articulated_joint, forward_kinematics, joint_frames, HandPose, HandSkeleton, NUM_ARTICULATED, NUM_JOINTS,
};
use crate::error::{Error, Result};
use crate::geom::Similarity;
use crate::registration::best_fit_similarity;
use crate::geom::Cloud;
use nalgebra::{DMatrix, DVector, Matrix3, Point3, Rotation3, Vector3};

/// Number of pose unknowns: a rotation increment per articulated joint and the translation.
pub const POSE_DOF: usize = 3 * NUM_ARTICULATED + 3;

/// Applies local increments: rotation k becomes `R_k · exp(δ_k)` and the
/// translation moves by the last three entries.
pub fn perturb_pose(pose: &HandPose, delta: &[f64]) -> HandPose {
    let mut out = pose.clone();
    for k in 0..NUM_ARTICULATED {
        let d = Vector3::new(delta[3 * k], delta[3 * k + 1], delta[3 * k + 2]);
        let r = Rotation3::new(pose.rotations[k]) * Rotation3::new(d);
        out.rotations[k] = r.scaled_axis();
    }
    out.translation += Vector3::new(delta[3 * NUM_ARTICULATED], delta[3 * NUM_ARTICULATED + 1], delta[3 * NUM_ARTICULATED + 2]);
    out
}

/// ∂(joint positions)/∂(local increments), 63 × 51, rows `3·joint + axis`.
pub fn fk_jacobian(skeleton: &HandSkeleton, pose: &HandPose) -> DMatrix<f64> {
    let frames = joint_frames(skeleton, pose);
    let mut jac = DMatrix::zeros(3 * NUM_JOINTS, POSE_DOF);
    for a in 0..NUM_ARTICULATED {
        let j = articulated_joint(a);
        let g = frames[j].rotation.matrix();
        for k in 0..NUM_JOINTS {
            if k == j || !skeleton.is_descendant(k, j) {
                continue;
            }
            let r = frames[k].position - frames[j].position;
            let block = -r.cross_matrix() * g;
            jac.fixed_view_mut::<3, 3>(3 * k, 3 * a).copy_from(&block);
        }
    }
    for k in 0..NUM_JOINTS {
        jac.fixed_view_mut::<3, 3>(3 * k, 3 * NUM_ARTICULATED).copy_from(&Matrix3::identity());
    }
    jac
}

/// Per-axis bounds on the axis-angle vector of every articulated joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    pub lower: [Vector3<f64>; NUM_ARTICULATED],
    pub upper: [Vector3<f64>; NUM_ARTICULATED],
}

impl Default for JointLimits {
    fn default() -> Self {
        let big = Vector3::repeat(std::f64::consts::PI);
        let mut lower = [Vector3::new(-0.4, -0.4, -0.4); NUM_ARTICULATED];
        let mut upper = [Vector3::new(1.8, 0.4, 0.4); NUM_ARTICULATED];
        lower[0] = -big;
        upper[0] = big;
        // distal joints flex only
        for a in 1..NUM_ARTICULATED {
            if (a - 1) % 3 > 0 {
                lower[a] = Vector3::new(-0.1, -0.05, -0.05);
                upper[a] = Vector3::new(2.0, 0.05, 0.05);
            }
        }
        Self { lower, upper }
    }
}

impl JointLimits {
    pub fn clamp(&self, pose: &mut HandPose) {
        for k in 0..NUM_ARTICULATED {
            pose.rotations[k] = pose.rotations[k].zip_zip_map(&self.lower[k], &self.upper[k], |v, lo, hi| v.clamp(lo, hi));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkOptions {
    pub damping: f64,
    pub max_iterations: usize,
    /// Stop once the RMS residual changes by less than this between iterations.
    pub tolerance: f64,
    pub limits: Option<JointLimits>,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            max_iterations: 200,
            tolerance: 1e-9,
            limits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub pose: HandPose,
    /// RMS joint-position error (meters).
    pub residual: f64,
    pub iterations: usize,
}

fn rms(joints: &[Point3<f64>], target: &[Point3<f64>]) -> f64 {
    let s: f64 = joints.iter().zip(target).map(|(a, b)| (a - b).norm_squared()).sum();
    (s / joints.len() as f64).sqrt()
}

/// Wrist orientation and translation from the wrist and finger-base joints.
fn initial_pose(skeleton: &HandSkeleton, target: &[Point3<f64>]) -> HandPose {
    let ids = [0usize, 1, 5, 9, 13, 17];
    let rest = skeleton.rest_joints();
    let src = Cloud::from_points_unchecked(ids.iter().map(|&i| rest[i]).collect());
    let dst = Cloud::from_points_unchecked(ids.iter().map(|&i| target[i]).collect());
    let pairs: Vec<_> = (0..ids.len()).map(|i| (i, i)).collect();
    let mut pose = HandPose::rest();
    let fit: Option<Similarity<f64>> = best_fit_similarity(&src, &dst, &pairs, false).ok();
    match fit {
        Some(t) => {
            let r = Rotation3::from_matrix_unchecked(*t.rotation());
            pose.rotations[0] = r.scaled_axis();
            pose.translation = *t.translation();
        }
        None => pose.translation = target[0].coords,
    }
    pose
}

/// Fits a pose to 21 target joints by damped least squares. The residual is
/// returned even when the iteration budget runs out.
pub fn inverse_kinematics(target: &[Point3<f64>], skeleton: &HandSkeleton, opts: &IkOptions) -> Result<IkResult> {
    if target.len() != NUM_JOINTS {
        return Err(Error::shape("IK targets", NUM_JOINTS, target.len()));
    }
    if let Some(i) = target.iter().position(|p| !p.coords.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite(format!("IK target joint {i}")));
    }
    if !(opts.damping > 0.0) || opts.max_iterations == 0 {
        return Err(Error::precondition("IK needs positive damping and at least one iteration"));
    }
    let mut pose = initial_pose(skeleton, target);
    if let Some(l) = &opts.limits {
        l.clamp(&mut pose);
    }
    let mut joints = forward_kinematics(skeleton, &pose);
    let mut err = rms(&joints, target);
    let mut lambda = opts.damping;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = fk_jacobian(skeleton, &pose);
        let r = DVector::from_iterator(
            3 * NUM_JOINTS,
            joints.iter().zip(target).flat_map(|(a, b)| (b - a).iter().copied().collect::<Vec<_>>()),
        );
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let jtr = &jt * r;
        // Levenberg-style damping: grow on a rejected step, shrink on success.
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..POSE_DOF {
                a[(d, d)] += lambda * lambda;
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = perturb_pose(&pose, step.as_slice());
            if let Some(l) = &opts.limits {
                l.clamp(&mut cand);
            }
            let cj = forward_kinematics(skeleton, &cand);
            let ce = rms(&cj, target);
            if ce <= err {
                pose = cand;
                joints = cj;
                let change = err - ce;
                err = ce;
                lambda = (lambda / 10.0).max(opts.damping);
                accepted = true;
                if change < opts.tolerance {
                    return Ok(IkResult { pose, residual: err, iterations });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(IkResult {
        pose,
        residual: err,
        iterations,
    })
}

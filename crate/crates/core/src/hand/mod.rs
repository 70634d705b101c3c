//! Simplified kinematic hand: 21 joints, skinning, heatmap decoding and IK.

mod heatmap;
mod ik;
mod skeleton;
mod surface;

pub use heatmap::{keypoints_from_heatmaps, KeypointHeatmaps};
pub use ik::{fk_jacobian, inverse_kinematics, perturb_pose, IkOptions, IkResult, JointLimits, POSE_DOF};
pub use skeleton::{
    articulated_joint, articulation_of, finger_of, forward_kinematics, joint_frames, HandPose, HandSkeleton,
    JointFrame, FINGER_NAMES, NUM_ARTICULATED, NUM_JOINTS,
};
pub use surface::{skin, HandSurface, PALM_VERTS, TEMPLATE_VERTS, VERTS_PER_BONE};

use nalgebra::Vector3;
use rand::Rng;

/// Random pose inside the default joint limits: free wrist orientation,
/// fingers flexed up to `max_flex` radians with small sideways motion.
pub fn random_pose<R: Rng>(rng: &mut R, max_flex: f64, translation: Vector3<f64>) -> HandPose {
    let mut pose = HandPose::rest();
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() > 1e-6 { axis.normalize() } else { Vector3::z() };
    pose.rotations[0] = axis * rng.random_range(0.0..std::f64::consts::PI);
    for k in 1..NUM_ARTICULATED {
        let proximal = (k - 1) % 3 == 0;
        let side = if proximal { 0.2 } else { 0.0 };
        pose.rotations[k] = Vector3::new(
            rng.random_range(0.0..max_flex),
            if side > 0.0 { rng.random_range(-side..side) } else { 0.0 },
            if side > 0.0 { rng.random_range(-side..side) } else { 0.0 },
        );
    }
    pose.translation = translation;
    pose
}

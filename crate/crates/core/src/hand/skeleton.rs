use crate::error::{Error, Result};
use nalgebra::{Point3, Rotation3, Vector3};

pub const NUM_JOINTS: usize = 21;
/// Wrist plus the three proximal joints of every finger; fingertips carry no rotation.
pub const NUM_ARTICULATED: usize = 16;
pub const FINGER_NAMES: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

/// Joint index of the `k`-th articulated joint, or `None` for fingertips.
pub fn articulated_joint(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        let f = (k - 1) / 3;
        1 + 4 * f + (k - 1) % 3
    }
}

/// Inverse of [`articulated_joint`].
pub fn articulation_of(joint: usize) -> Option<usize> {
    match joint {
        0 => Some(0),
        j if j < NUM_JOINTS => {
            let (f, k) = ((j - 1) / 4, (j - 1) % 4);
            (k < 3).then_some(1 + 3 * f + k)
        }
        _ => None,
    }
}

/// Finger of a non-wrist joint.
pub fn finger_of(joint: usize) -> Option<usize> {
    (1..NUM_JOINTS).contains(&joint).then(|| (joint - 1) / 4)
}

/// Kinematic tree: wrist (0) and five chains of four joints
/// (thumb 1–4, index 5–8, middle 9–12, ring 13–16, pinky 17–20).
#[derive(Debug, Clone, PartialEq)]
pub struct HandSkeleton {
    parents: [i32; NUM_JOINTS],
    /// Rest offset of each joint in its parent's frame (unscaled).
    offsets: [Vector3<f64>; NUM_JOINTS],
    finger_scales: [f64; 5],
}

impl Default for HandSkeleton {
    fn default() -> Self {
        // fingers along +y, thumb side +x, palm normal +z
        let bases = [
            (Vector3::new(0.020, 0.025, 0.0), Vector3::new(0.7, 0.7, 0.0), [0.040, 0.035, 0.030, 0.025]),
            (Vector3::new(0.024, 0.090, 0.0), Vector3::y(), [0.0, 0.042, 0.026, 0.021]),
            (Vector3::new(0.003, 0.095, 0.0), Vector3::y(), [0.0, 0.046, 0.029, 0.023]),
            (Vector3::new(-0.017, 0.090, 0.0), Vector3::y(), [0.0, 0.042, 0.027, 0.022]),
            (Vector3::new(-0.035, 0.080, 0.0), Vector3::y(), [0.0, 0.033, 0.021, 0.019]),
        ];
        let mut parents = [0i32; NUM_JOINTS];
        let mut offsets = [Vector3::zeros(); NUM_JOINTS];
        parents[0] = -1;
        for (f, (base, dir, lens)) in bases.iter().enumerate() {
            let dir = dir.normalize();
            for k in 0..4 {
                let j = 1 + 4 * f + k;
                parents[j] = if k == 0 { 0 } else { (j - 1) as i32 };
                offsets[j] = if k == 0 { base + dir * lens[0] } else { dir * lens[k] };
            }
        }
        Self {
            parents,
            offsets,
            finger_scales: [1.0; 5],
        }
    }
}

impl HandSkeleton {
    pub fn new(parents: [i32; NUM_JOINTS], offsets: [Vector3<f64>; NUM_JOINTS], finger_scales: [f64; 5]) -> Result<Self> {
        if parents[0] != -1 {
            return Err(Error::precondition("joint 0 must be the root"));
        }
        for j in 1..NUM_JOINTS {
            let p = parents[j];
            if p < 0 || p as usize >= j {
                return Err(Error::precondition(format!("joint {j} has invalid parent {p}")));
            }
            let expected = if (j - 1) % 4 == 0 { 0 } else { j - 1 };
            if p as usize != expected {
                return Err(Error::precondition(format!(
                    "joint {j} must hang from joint {expected} (five chains of four)"
                )));
            }
        }
        if offsets.iter().any(|o| !o.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("skeleton offsets".into()));
        }
        if finger_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::precondition("finger scales must be positive"));
        }
        Ok(Self {
            parents,
            offsets,
            finger_scales,
        })
    }

    pub fn with_finger_scales(mut self, scales: [f64; 5]) -> Result<Self> {
        self = Self::new(self.parents, self.offsets, scales)?;
        Ok(self)
    }

    pub fn parents(&self) -> &[i32; NUM_JOINTS] {
        &self.parents
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        (self.parents[j] >= 0).then(|| self.parents[j] as usize)
    }

    pub fn raw_offsets(&self) -> &[Vector3<f64>; NUM_JOINTS] {
        &self.offsets
    }

    pub fn finger_scales(&self) -> &[f64; 5] {
        &self.finger_scales
    }

    /// Offset of `j` in its parent's frame with the finger scale applied.
    pub fn offset(&self, j: usize) -> Vector3<f64> {
        match finger_of(j) {
            Some(f) => self.offsets[j] * self.finger_scales[f],
            None => self.offsets[j],
        }
    }

    /// Joint positions in the rest pose.
    pub fn rest_joints(&self) -> Vec<Point3<f64>> {
        forward_kinematics(self, &HandPose::rest())
    }

    /// `true` when `a` is `j` or lies below it.
    pub fn is_descendant(&self, a: usize, j: usize) -> bool {
        let mut k = Some(a);
        while let Some(c) = k {
            if c == j {
                return true;
            }
            k = self.parent(c);
        }
        false
    }
}

/// Axis-angle rotation per articulated joint plus a global translation.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub rotations: [Vector3<f64>; NUM_ARTICULATED],
    pub translation: Vector3<f64>,
}

impl HandPose {
    pub fn rest() -> Self {
        Self {
            rotations: [Vector3::zeros(); NUM_ARTICULATED],
            translation: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotations.iter().chain(std::iter::once(&self.translation)).any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("hand pose".into()));
        }
        Ok(())
    }

    pub fn local_rotation(&self, joint: usize) -> Rotation3<f64> {
        match articulation_of(joint) {
            Some(k) => Rotation3::new(self.rotations[k]),
            None => Rotation3::identity(),
        }
    }
}

/// Global frame of a joint: orientation and position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFrame {
    pub rotation: Rotation3<f64>,
    pub position: Point3<f64>,
}

pub fn joint_frames(skeleton: &HandSkeleton, pose: &HandPose) -> Vec<JointFrame> {
    let mut frames: Vec<JointFrame> = Vec::with_capacity(NUM_JOINTS);
    for j in 0..NUM_JOINTS {
        let local = pose.local_rotation(j);
        let frame = match skeleton.parent(j) {
            None => JointFrame {
                rotation: local,
                position: Point3::from(pose.translation + local * skeleton.offset(j)),
            },
            Some(p) => {
                let parent = frames[p];
                JointFrame {
                    rotation: parent.rotation * local,
                    position: parent.position + parent.rotation * skeleton.offset(j),
                }
            }
        };
        frames.push(frame);
    }
    frames
}

/// The 21 joint positions for `pose`.
pub fn forward_kinematics(skeleton: &HandSkeleton, pose: &HandPose) -> Vec<Point3<f64>> {
    joint_frames(skeleton, pose).into_iter().map(|f| f.position).collect()
}

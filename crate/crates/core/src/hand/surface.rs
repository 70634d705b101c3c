//! Procedural template surface and linear blend skinning.

use super::skeleton::{joint_frames, HandPose, HandSkeleton, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::geom::Cloud;
use nalgebra::{DMatrix, Point3, Vector3};

pub const VERTS_PER_BONE: usize = 12;
pub const PALM_VERTS: usize = 16;
pub const TEMPLATE_VERTS: usize = 20 * VERTS_PER_BONE + PALM_VERTS;

#[derive(Debug, Clone, PartialEq)]
pub struct HandSurface {
    template: Cloud<f64>,
    /// vertices × joints, rows sum to 1.
    weights: DMatrix<f64>,
}

impl HandSurface {
    pub fn new(template: Cloud<f64>, weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != template.len() || weights.ncols() != NUM_JOINTS {
            return Err(Error::shape(
                "skinning weights",
                format!("{}x{NUM_JOINTS}", template.len()),
                format!("{}x{}", weights.nrows(), weights.ncols()),
            ));
        }
        for (i, row) in weights.row_iter().enumerate() {
            if row.iter().any(|w| !(*w >= 0.0)) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::precondition(format!("skinning weights of vertex {i} are not a distribution")));
            }
        }
        Ok(Self { template, weights })
    }

    /// Capsule-like template: 12 vertices around every bone (4 stations × 3
    /// around the axis) and a 4×4 palm patch, all in the rest pose.
    pub fn template(skeleton: &HandSkeleton) -> Self {
        let rest = skeleton.rest_joints();
        let mut pts = Vec::with_capacity(TEMPLATE_VERTS);
        let mut weights = DMatrix::zeros(TEMPLATE_VERTS, NUM_JOINTS);
        for j in 1..NUM_JOINTS {
            let p = skeleton.parent(j).expect("non-root joint");
            let axis = rest[j] - rest[p];
            let dir = axis.normalize();
            let side = if dir.z.abs() < 0.9 { dir.cross(&Vector3::z()).normalize() } else { dir.cross(&Vector3::x()).normalize() };
            let up = dir.cross(&side);
            let radius = 0.008;
            for s in 0..4 {
                let t = (s as f64 + 0.5) / 4.0;
                for r in 0..3 {
                    let ang = r as f64 * 2.0 * std::f64::consts::PI / 3.0 + 0.3 * s as f64;
                    let v = rest[p] + axis * t + (side * ang.cos() + up * ang.sin()) * radius;
                    let row = pts.len();
                    pts.push(v);
                    match skeleton.parent(p) {
                        Some(gp) => {
                            weights[(row, p)] = 0.5 + 0.5 * t;
                            weights[(row, gp)] = 0.5 - 0.5 * t;
                        }
                        None => weights[(row, p)] = 1.0,
                    }
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                let row = pts.len();
                pts.push(Point3::new(-0.03 + 0.02 * a as f64, 0.015 + 0.022 * b as f64, 0.006));
                weights[(row, 0)] = 1.0;
            }
        }
        Self {
            template: Cloud::from_points_unchecked(pts),
            weights,
        }
    }

    pub fn template_cloud(&self) -> &Cloud<f64> {
        &self.template
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

/// Linear blend skinning of the template under `pose`.
pub fn skin(skeleton: &HandSkeleton, pose: &HandPose, surface: &HandSurface) -> Cloud<f64> {
    let rest = skeleton.rest_joints();
    let frames = joint_frames(skeleton, pose);
    let pts = surface
        .template
        .points()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut acc = Vector3::zeros();
            for j in 0..NUM_JOINTS {
                let w = surface.weights[(i, j)];
                if w != 0.0 {
                    acc += (frames[j].rotation * (v - rest[j]) + frames[j].position.coords) * w;
                }
            }
            Point3::from(acc)
        })
        .collect();
    Cloud::from_points_unchecked(pts)
}

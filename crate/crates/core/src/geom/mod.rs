//! Point clouds, spatial indexing, pinhole projection, similarity transforms
//! and the two reconstruction metrics (Chamfer distance and F-score).

mod camera;
mod cloud;
mod kdtree;
mod metrics;
mod sampling;
mod transform;

pub use camera::Intrinsics;
pub use cloud::Cloud;
pub use kdtree::KdTree;
pub use metrics::{chamfer, f_score, precision_recall, PrecisionRecall};
pub use sampling::farthest_point_sampling;
pub use transform::Similarity;

use crate::scalar::Real;
use nalgebra::Point3;

#[inline]
pub(crate) fn dist2<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub(crate) fn is_finite_point<T: Real>(p: &Point3<T>) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

pub mod error;
pub mod fusion;
pub mod geom;
pub mod hand;
pub mod io;
pub mod losses;
pub mod pipeline;
pub mod registration;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PointCloud = geom::Cloud<f64>;
pub type PointCloud32 = geom::Cloud<f32>;
pub type SimilarityTransform = geom::Similarity<f64>;
pub type CameraIntrinsics = geom::Intrinsics<f64>;
pub type SpatialIndex = geom::KdTree<f64>;

//! Synthetic ground truth: shapes, scenes, masks, heatmaps and stand-in features.

mod features;
mod render;
mod scene;
mod shapes;

pub use features::{raw_channels, synth_features, RAW_CHANNELS};
pub use render::{make_heatmaps, render_masks, splat_depth, FAR_DEPTH};
pub use scene::{make_scene, palm_center, SceneConfig, SceneSample};
pub use shapes::{make_object, Shape, ShapeFamily, ShapeSpec};

use crate::error::Result;
use crate::registration::PrototypeLibrary;

/// One canonical prototype per family, `points` surface samples each.
pub fn default_library(points: usize, seed: u64) -> Result<PrototypeLibrary<f64>> {
    let mut lib = PrototypeLibrary::new();
    for (i, family) in ShapeFamily::ALL.into_iter().enumerate() {
        let cloud = make_object(&ShapeSpec {
            shape: Shape::canonical(family),
            points,
            seed: seed.wrapping_add(i as u64),
        })?;
        lib.insert(family.name(), cloud)?;
    }
    Ok(lib)
}

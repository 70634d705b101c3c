//! Point-cloud/image feature fusion and the offset-regressing refiner.

mod attention;
mod config;
mod decoder;
mod encoder;
mod features;
mod gradcheck;
mod model;
mod params;
mod train;

pub use attention::{fuse, AttentionState};
pub use config::{FusionConfig, LevelConfig, GEOMETRIC_EXTRA};
pub use decoder::{decode, Topology, INTERPOLATION_NEIGHBOURS};
pub use encoder::{encode_prior, PatchFeatures};
pub use features::{FeatureGrid, GlobalFeature};
pub use gradcheck::{finite_difference_check, grad_check, random_params, random_sample, GradCheck, FD_STEP};
pub use model::{
    attention_states, evaluate, predict_mask, refine, Evaluation, LossTerm, ObjectiveWeights, PreparedSample,
    RefinerSample,
};
pub use params::{FusionParams, TensorSpec};
pub use train::{train_refiner, EpochRecord, Stage, TrainConfig, TrainOutput};

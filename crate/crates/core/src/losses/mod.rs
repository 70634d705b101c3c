//! Loss terms of the refinement objective, occlusion rate and evaluation reports.

mod mask;
mod report;
mod terms;

pub use mask::{Mask, MaskKind};
pub use report::{
    aggregate, evaluate, median, occlusion_binned_report, score_sample, Aggregate, EvalOptions, EvalSample,
    MetricsReport, OcclusionBin, SampleMetrics, METERS_TO_MM,
};
pub use terms::{
    loss_mask, loss_pose, loss_pose_joints, loss_proj, loss_rec, loss_total, loss_weight, occlusion_rate, ArgmaxMode,
    JointAggregation, LossBreakdown, LossParts, LAMBDA_PROJ, LAMBDA_WEIGHT, MASK_EPS,
};
pub(crate) use terms::bce;

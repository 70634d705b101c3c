//! Glue between scenes, registration and the refiner.

use crate::error::Result;
use crate::fusion::{FusionConfig, RefinerSample};
use crate::geom::{chamfer, Cloud};
use crate::hand::keypoints_from_heatmaps;
use crate::losses::loss_pose_joints;
use crate::losses::JointAggregation;
use crate::registration::{icp_align, pseudo_correspondence, CorrespondenceMap, IcpOptions, IcpResult};
use crate::synth::{synth_features, SceneSample, Shape};
use crate::SimilarityTransform;
use crate::hand::KeypointHeatmaps;
use crate::CameraIntrinsics;
use nalgebra::Point3;

/// Feature and rendering settings shared by training and inference.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSettings {
    pub seed: u64,
    pub splat_radius: f64,
    pub occluder_splat_radius: f64,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            seed: 1234,
            splat_radius: 2.0,
            occluder_splat_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub transform: SimilarityTransform,
    pub aligned: Cloud<f64>,
    pub correspondence: CorrespondenceMap,
    pub mse: f64,
}

/// ICP of the prior onto the ground-truth object and the induced pseudo-correspondence.
pub fn register_prior(prior: &Cloud<f64>, target: &Cloud<f64>, opts: &IcpOptions<f64>) -> Result<Registration> {
    let IcpResult { transform, mse, .. } = icp_align(prior, target, opts)?;
    let correspondence = pseudo_correspondence(target, &transform, prior)?;
    Ok(Registration {
        aligned: transform.apply(prior),
        transform,
        correspondence,
        mse,
    })
}

/// Hand joints and object center read off the scene heatmaps.
#[derive(Debug, Clone, PartialEq)]
pub struct PosePrediction {
    pub joints: Vec<Point3<f64>>,
    pub object_center: Point3<f64>,
}

pub fn predict_pose(scene: &SceneSample) -> Result<PosePrediction> {
    predict_pose_from(&scene.hand_heatmaps, &scene.object_heatmap, &scene.heatmap_camera)
}

pub fn predict_pose_from(
    hand: &KeypointHeatmaps,
    object: &KeypointHeatmaps,
    camera: &CameraIntrinsics,
) -> Result<PosePrediction> {
    let joints = keypoints_from_heatmaps(hand, camera)?;
    let center = keypoints_from_heatmaps(object, camera)?[0];
    Ok(PosePrediction {
        joints,
        object_center: center,
    })
}

/// Hand (summed over joints) and object center terms, in squared loss units.
pub fn pose_terms(scene: &SceneSample, pred: &PosePrediction, unit: f64) -> Result<[f64; 2]> {
    pose_terms_from(pred, &scene.hand_joints, &scene.object_center, unit)
}

pub fn pose_terms_from(
    pred: &PosePrediction,
    joints: &[Point3<f64>],
    center: &Point3<f64>,
    unit: f64,
) -> Result<[f64; 2]> {
    let s = |p: &[Point3<f64>]| p.iter().map(|q| q * unit).collect::<Vec<_>>();
    let ph = loss_pose_joints(&s(&pred.joints), &s(joints), JointAggregation::Sum)?;
    let po = ((pred.object_center - center) * unit).norm_squared();
    Ok([ph, po])
}

/// Training sample from a scene and a registered prior.
pub fn refiner_sample(
    id: impl Into<String>,
    scene: &SceneSample,
    reg: &Registration,
    cfg: &FusionConfig,
    features: &FeatureSettings,
) -> Result<RefinerSample> {
    let (grids, global) = synth_features(scene, cfg, features.seed, features.splat_radius, features.occluder_splat_radius)?;
    let l2 = &cfg.levels[1];
    let mask_target = scene.amodal.downsample(l2.grid_w, l2.grid_h)?;
    let pred = predict_pose(scene)?;
    Ok(RefinerSample {
        id: id.into(),
        prior: reg.aligned.clone(),
        target: scene.object.clone(),
        correspondence: reg.correspondence.clone(),
        camera: scene.camera,
        grids,
        global,
        mask_target,
        pose_terms: pose_terms(scene, &pred, cfg.loss_unit)?,
    })
}

/// Places a prior without ground truth: centered on the predicted object
/// center and scaled so its RMS radius matches the category's canonical shape.
pub fn place_prior(prior: &Cloud<f64>, center: &Point3<f64>, category_shape: &Shape) -> Result<Cloud<f64>> {
    prior.require_non_empty("prior")?;
    let reference = crate::synth::make_object(&crate::synth::ShapeSpec {
        shape: *category_shape,
        points: 2048,
        seed: 0,
    })?;
    let rms = |c: &Cloud<f64>| {
        let m = c.centroid();
        (c.points().iter().map(|p| (p - m).norm_squared()).sum::<f64>() / c.len() as f64).sqrt()
    };
    let s = rms(&reference) / rms(prior).max(1e-12);
    let m = prior.centroid();
    Cloud::new(prior.points().iter().map(|p| center + (p - m) * s).collect())
}

/// Chamfer after removing each cloud's centroid.
pub fn centered_chamfer(a: &Cloud<f64>, b: &Cloud<f64>) -> Result<f64> {
    chamfer(&a.centered(), &b.centered())
}

/// Scales a cloud about the origin (meters → millimeters with 1000).
pub fn to_units(c: &Cloud<f64>, unit: f64) -> Cloud<f64> {
    c.scaled(unit)
}


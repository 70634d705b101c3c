use super::render::{make_heatmaps, render_masks};
use super::shapes::{make_object, Shape, ShapeFamily, ShapeSpec};
use crate::error::{Error, Result};
use crate::geom::Cloud;
use crate::hand::{forward_kinematics, random_pose, skin, HandPose, HandSkeleton, HandSurface, KeypointHeatmaps};
use crate::losses::{occlusion_rate, Mask};
use crate::CameraIntrinsics;
use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub families: Vec<ShapeFamily>,
    pub object_points: usize,
    pub image_size: usize,
    pub focal: f64,
    /// Object center depth range (meters).
    pub depth_min: f64,
    pub depth_max: f64,
    /// Palm offset toward the camera as a fraction of the object diameter.
    pub hand_forward_min: f64,
    pub hand_forward_max: f64,
    /// Largest sideways palm offset as a fraction of the object diameter.
    pub hand_lateral_max: f64,
    pub splat_radius: f64,
    pub occluder_splat_radius: f64,
    /// Heatmaps are rendered at `image_size / heatmap_downsample`.
    pub heatmap_downsample: usize,
    pub heatmap_sigma: f64,
    pub max_retries: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            families: ShapeFamily::ALL.to_vec(),
            object_points: 1024,
            image_size: 256,
            focal: 480.0,
            depth_min: 0.45,
            depth_max: 0.6,
            hand_forward_min: 0.6,
            hand_forward_max: 1.0,
            hand_lateral_max: 1.2,
            splat_radius: 2.0,
            occluder_splat_radius: 5.0,
            heatmap_downsample: 4,
            heatmap_sigma: 1.5,
            max_retries: 32,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.families.is_empty() {
            errs.push("synth: families must not be empty".to_string());
        }
        if self.object_points == 0 {
            errs.push("synth: object_points must be positive".into());
        }
        if self.image_size == 0 || !(self.focal > 0.0) {
            errs.push("synth: image_size and focal must be positive".into());
        }
        if !(self.depth_min > 0.0 && self.depth_min <= self.depth_max) {
            errs.push("synth: need 0 < depth_min <= depth_max".into());
        }
        if !(self.hand_forward_min >= 0.0 && self.hand_forward_min <= self.hand_forward_max) {
            errs.push("synth: need 0 <= hand_forward_min <= hand_forward_max".into());
        }
        if !(self.hand_lateral_max >= 0.0) {
            errs.push("synth: hand_lateral_max must be non-negative".into());
        }
        if !(self.splat_radius >= 0.0 && self.occluder_splat_radius >= 0.0) {
            errs.push("synth: splat radii must be non-negative".into());
        }
        if self.heatmap_downsample == 0 || self.image_size % self.heatmap_downsample != 0 {
            errs.push("synth: heatmap_downsample must divide image_size".into());
        }
        if !(self.heatmap_sigma >= 0.0) {
            errs.push("synth: heatmap_sigma must be non-negative".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn camera(&self) -> Result<CameraIntrinsics> {
        let c = self.image_size as f64 / 2.0;
        CameraIntrinsics::new(self.focal, self.focal, c, c, self.image_size, self.image_size)
    }

    pub fn heatmap_camera(&self) -> Result<CameraIntrinsics> {
        let n = self.image_size / self.heatmap_downsample;
        self.camera()?.rescaled(1.0 / self.heatmap_downsample as f64, n, n)
    }
}

/// One synthetic interaction instance with all of its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub seed: u64,
    pub shape: Shape,
    /// Posed object points V.
    pub object: Cloud<f64>,
    /// C_o, the centroid of `object`.
    pub object_center: Point3<f64>,
    /// Object orientation and position applied to the canonical shape.
    pub object_rotation: Rotation3<f64>,
    pub hand_pose: HandPose,
    /// C_h.
    pub hand_joints: Vec<Point3<f64>>,
    pub hand: Cloud<f64>,
    pub camera: CameraIntrinsics,
    pub amodal: Mask,
    pub visible: Mask,
    /// Camera of the heatmap raster.
    pub heatmap_camera: CameraIntrinsics,
    pub hand_heatmaps: KeypointHeatmaps,
    pub object_heatmap: KeypointHeatmaps,
}

impl SceneSample {
    pub fn category(&self) -> ShapeFamily {
        self.shape.family()
    }

    pub fn occlusion_rate(&self) -> Result<f64> {
        occlusion_rate(&self.visible, &self.amodal)
    }
}

fn inside(k: &CameraIntrinsics, pts: &[Point3<f64>], margin: f64) -> bool {
    pts.iter().all(|p| {
        p.z > 0.05 && {
            let uv = k.project_unchecked(p);
            uv.x >= margin && uv.y >= margin && uv.x <= k.width as f64 - 1.0 - margin && uv.y <= k.height as f64 - 1.0 - margin
        }
    })
}

fn random_rotation<R: Rng>(rng: &mut R) -> Rotation3<f64> {
    let axis = loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v;
        }
    };
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.random_range(0.0..std::f64::consts::PI))
}

/// Builds a scene: shape family and dimensions, object pose inside the
/// frustum, a hand placed between object and camera, masks and heatmaps.
pub fn make_scene(config: &SceneConfig, seed: u64) -> Result<SceneSample> {
    config.validate()?;
    let k = config.camera()?;
    let hk = config.heatmap_camera()?;
    let skeleton = HandSkeleton::default();
    let surface = HandSurface::template(&skeleton);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = config.families[rng.random_range(0..config.families.len())];
    let shape = Shape::random(family, &mut rng);
    let canonical = make_object(&ShapeSpec {
        shape,
        points: config.object_points,
        seed: rng.random(),
    })?;
    let diameter = shape.diameter();
    for _ in 0..config.max_retries {
        let rotation = random_rotation(&mut rng);
        let depth = rng.random_range(config.depth_min..=config.depth_max);
        let lim = 0.15 * depth * config.image_size as f64 / config.focal;
        let position = Vector3::new(rng.random_range(-lim..lim), rng.random_range(-lim..lim), depth);
        let object = Cloud::new(canonical.points().iter().map(|p| rotation * p + position).collect())?;
        let center = object.centroid();

        let toward_camera = -center.coords.normalize();
        let side = toward_camera.cross(&Vector3::y()).normalize();
        let up = toward_camera.cross(&side);
        let forward = rng.random_range(config.hand_forward_min..=config.hand_forward_max) * diameter;
        let lateral = rng.random_range(0.0..=config.hand_lateral_max) * diameter;
        let angle = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let palm_target = center + toward_camera * forward + (side * angle.cos() + up * angle.sin()) * lateral;
        let mut hand_pose = random_pose(&mut rng, 1.0, Vector3::zeros());
        let rest = forward_kinematics(&skeleton, &hand_pose);
        let palm = palm_center(&rest);
        hand_pose.translation = palm_target - palm;
        let hand_joints = forward_kinematics(&skeleton, &hand_pose);
        let hand = skin(&skeleton, &hand_pose, &surface);
        if !inside(&k, object.points(), 2.0) || !inside(&k, &hand_joints, 0.0) {
            continue;
        }
        let (amodal, visible) = render_masks(&object, &hand, &k, config.splat_radius, config.occluder_splat_radius)?;
        let hand_heatmaps = make_heatmaps(&hand_joints, &hk, config.heatmap_sigma)?;
        let object_heatmap = make_heatmaps(&[center], &hk, config.heatmap_sigma)?;
        return Ok(SceneSample {
            seed,
            shape,
            object,
            object_center: center,
            object_rotation: rotation,
            hand_pose,
            hand_joints,
            hand,
            camera: k,
            amodal,
            visible,
            heatmap_camera: hk,
            hand_heatmaps,
            object_heatmap,
        });
    }
    Err(Error::precondition(format!(
        "scene {seed}: no placement inside the camera frustum after {} attempts",
        config.max_retries
    )))
}

/// Mean of the wrist and the four finger bases.
pub fn palm_center(joints: &[Point3<f64>]) -> Point3<f64> {
    let ids = [0usize, 5, 9, 13, 17];
    Point3::from(ids.iter().map(|&i| joints[i].coords).sum::<Vector3<f64>>() / ids.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_consistent() {
        let cfg = SceneConfig::default();
        let a = make_scene(&cfg, 17).unwrap();
        assert_eq!(a, make_scene(&cfg, 17).unwrap());
        assert!((a.object.centroid() - a.object_center).norm() < 1e-9);
        assert!(a.visible.is_subset_of(&a.amodal));
        assert_eq!((a.amodal.width(), a.amodal.height()), (256, 256));
        assert_eq!(a.hand_heatmaps.channels(), 21);
        assert_ne!(make_scene(&cfg, 18).unwrap(), a);
    }

    #[test]
    fn occlusion_spans_low_to_high() {
        let cfg = SceneConfig::default();
        let rates: Vec<f64> = (0..200).map(|s| make_scene(&cfg, s).unwrap().occlusion_rate().unwrap()).collect();
        let lo = rates.iter().copied().fold(f64::MAX, f64::min);
        let hi = rates.iter().copied().fold(f64::MIN, f64::max);
        assert!(lo <= 0.01, "min {lo}");
        assert!(hi >= 0.5, "max {hi}");
    }

    #[test]
    fn invalid_config_lists_all_problems() {
        let cfg = SceneConfig {
            families: vec![],
            heatmap_downsample: 3,
            ..Default::default()
        };
        match make_scene(&cfg, 0) {
            Err(Error::Config(e)) => assert_eq!(e.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}


//! On-disk sample layout shared by every subcommand.
//!
//! ```text
//! <dataset>/index.tsv            sample id -> split
//! <dataset>/<id>/manifest.tsv    seed, split, category, centers, cameras, occlusion
//! <dataset>/<id>/object.ply      hand.ply
//! <dataset>/<id>/amodal.pgm      visible.pgm
//! <dataset>/<id>/*.tensor        joints, pose, heatmaps, feature grids
//! ```

use anyhow::{bail, Context, Result};
use hoi_core::fusion::{FeatureGrid, GlobalFeature};
use hoi_core::hand::KeypointHeatmaps;
use hoi_core::io::{self, Manifest, PlyFormat, Tensor};
use hoi_core::losses::{occlusion_rate, Mask, MaskKind};
use hoi_core::synth::{ShapeFamily, SceneSample};
use hoi_core::{CameraIntrinsics, PointCloud};
use nalgebra::{DMatrix, DVector, Point3};
use std::path::{Path, PathBuf};

pub const INDEX: &str = "index.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Everything a sample directory holds, as read back from disk.
#[derive(Debug, Clone)]
pub struct StoredSample {
    pub id: String,
    pub seed: u64,
    pub category: ShapeFamily,
    pub object: PointCloud,
    pub object_center: Point3<f64>,
    pub hand: PointCloud,
    pub hand_joints: Vec<Point3<f64>>,
    pub camera: CameraIntrinsics,
    pub heatmap_camera: CameraIntrinsics,
    pub amodal: Mask,
    pub visible: Mask,
    pub hand_heatmaps: KeypointHeatmaps,
    pub object_heatmap: KeypointHeatmaps,
    pub grids: [FeatureGrid; 2],
    pub global: GlobalFeature,
}

impl StoredSample {
    pub fn occlusion_rate(&self) -> Result<f64> {
        Ok(occlusion_rate(&self.visible, &self.amodal)?)
    }
}

pub fn sample_id(index: usize) -> String {
    format!("{index:05}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn camera_str(k: &CameraIntrinsics) -> String {
    format!("{} {} {} {} {} {}", k.fx, k.fy, k.cx, k.cy, k.width, k.height)
}

fn parse_floats(s: &str, n: usize, key: &str, path: &Path) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .with_context(|| format!("{}: key '{key}': bad number list", path.display()))?;
    if v.len() != n {
        bail!("{}: key '{key}': expected {n} values, found {}", path.display(), v.len());
    }
    Ok(v)
}

fn parse_camera(m: &Manifest, key: &str, path: &Path) -> Result<CameraIntrinsics> {
    let v = parse_floats(m.require(key, path)?, 6, key, path)?;
    Ok(CameraIntrinsics::new(v[0], v[1], v[2], v[3], v[4] as usize, v[5] as usize)?)
}

fn points_tensor(points: &[Point3<f64>]) -> Result<Tensor> {
    Ok(Tensor::from_f64(
        vec![points.len(), 3],
        &points.iter().flat_map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(),
    )?)
}

fn tensor_points(t: &Tensor, path: &Path) -> Result<Vec<Point3<f64>>> {
    if t.shape().len() != 2 || t.shape()[1] != 3 {
        bail!("{}: expected an N×3 tensor, found shape {:?}", path.display(), t.shape());
    }
    Ok(t.to_f64().chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect())
}

fn heatmap_tensors(h: &KeypointHeatmaps) -> Result<(Tensor, Tensor)> {
    let shape = vec![h.channels(), h.height(), h.width()];
    Ok((Tensor::from_f64(shape.clone(), h.activation())?, Tensor::from_f64(shape, h.depth())?))
}

fn read_heatmaps(dir: &Path, stem: &str) -> Result<KeypointHeatmaps> {
    let a = io::read_tensor(&dir.join(format!("{stem}_activation.tensor")))?;
    let d = io::read_tensor(&dir.join(format!("{stem}_depth.tensor")))?;
    let [c, h, w] = a.shape() else {
        bail!("{}: {stem} heatmaps must be rank 3", dir.display());
    };
    if a.shape() != d.shape() {
        bail!("{}: {stem} activation and depth shapes differ", dir.display());
    }
    Ok(KeypointHeatmaps::new(*c, *h, *w, a.to_f64(), d.to_f64())?)
}

fn grid_tensor(g: &FeatureGrid) -> Result<Tensor> {
    let d = g.data();
    let mut flat = Vec::with_capacity(d.len());
    for r in 0..d.nrows() {
        flat.extend(d.row(r).iter().copied());
    }
    Ok(Tensor::from_f64(vec![g.height(), g.width(), d.ncols()], &flat)?)
}

fn read_grid(path: &Path, stride: f64) -> Result<FeatureGrid> {
    let t = io::read_tensor(path)?;
    let [h, w, c] = t.shape() else {
        bail!("{}: feature grid must be rank 3", path.display());
    };
    let data = DMatrix::from_row_iterator(h * w, *c, t.data().iter().map(|&v| v as f64));
    Ok(FeatureGrid::new(*h, *w, stride, data)?)
}

/// Writes one scene with its stand-in features into `dir`.
pub fn write_sample(
    dir: &Path,
    id: &str,
    split: Split,
    scene: &SceneSample,
    grids: &[FeatureGrid; 2],
    global: &GlobalFeature,
) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    io::write_cloud(&scene.object, &dir.join("object.ply"), PlyFormat::BinaryLittleEndian)?;
    io::write_cloud(&scene.hand, &dir.join("hand.ply"), PlyFormat::BinaryLittleEndian)?;
    io::write_mask(&scene.amodal, &dir.join("amodal.pgm"))?;
    io::write_mask(&scene.visible, &dir.join("visible.pgm"))?;
    io::write_tensor(&points_tensor(&scene.hand_joints)?, &dir.join("hand_joints.tensor"))?;
    let pose: Vec<Point3<f64>> = scene
        .hand_pose
        .rotations
        .iter()
        .chain(std::iter::once(&scene.hand_pose.translation))
        .map(|v| Point3::from(*v))
        .collect();
    io::write_tensor(&points_tensor(&pose)?, &dir.join("hand_pose.tensor"))?;
    for (stem, h) in [("hand", &scene.hand_heatmaps), ("object", &scene.object_heatmap)] {
        let (a, d) = heatmap_tensors(h)?;
        io::write_tensor(&a, &dir.join(format!("{stem}_activation.tensor")))?;
        io::write_tensor(&d, &dir.join(format!("{stem}_depth.tensor")))?;
    }
    for (l, g) in grids.iter().enumerate() {
        io::write_tensor(&grid_tensor(g)?, &dir.join(format!("features{}.tensor", l + 1)))?;
    }
    io::write_tensor(&Tensor::from_f64(vec![global.0.len()], global.0.as_slice())?, &dir.join("global.tensor"))?;

    let c = scene.object_center;
    let mut m = Manifest::new();
    m.insert("id", id)?;
    m.insert("seed", scene.seed)?;
    m.insert("split", split.name())?;
    m.insert("category", scene.category())?;
    m.insert("shape", format!("{:?}", scene.shape))?;
    m.insert("object_center", join([c.x, c.y, c.z]))?;
    m.insert("camera", camera_str(&scene.camera))?;
    m.insert("heatmap_camera", camera_str(&scene.heatmap_camera))?;
    m.insert("features1_stride", grids[0].stride())?;
    m.insert("features2_stride", grids[1].stride())?;
    m.insert("amodal_area", scene.amodal.area())?;
    m.insert("visible_area", scene.visible.area())?;
    m.insert("occlusion_rate", scene.occlusion_rate()?)?;
    io::write_manifest(&m, &dir.join("manifest.tsv"))?;
    Ok(())
}

pub fn read_sample(dir: &Path) -> Result<StoredSample> {
    let mpath = dir.join("manifest.tsv");
    let m = io::read_manifest(&mpath)?;
    let split_s = m.require("split", &mpath)?;
    Split::parse(split_s).with_context(|| format!("{}: bad split '{split_s}'", mpath.display()))?;
    let category: ShapeFamily = m.require("category", &mpath)?.parse()?;
    let c = parse_floats(m.require("object_center", &mpath)?, 3, "object_center", &mpath)?;
    let grids = [
        read_grid(&dir.join("features1.tensor"), m.parse("features1_stride", &mpath)?)?,
        read_grid(&dir.join("features2.tensor"), m.parse("features2_stride", &mpath)?)?,
    ];
    let global = io::read_tensor(&dir.join("global.tensor"))?;
    Ok(StoredSample {
        id: m.require("id", &mpath)?.to_string(),
        seed: m.parse("seed", &mpath)?,
        category,
        object: io::read_cloud(&dir.join("object.ply"))?,
        object_center: Point3::new(c[0], c[1], c[2]),
        hand: io::read_cloud(&dir.join("hand.ply"))?,
        hand_joints: tensor_points(&io::read_tensor(&dir.join("hand_joints.tensor"))?, dir)?,
        camera: parse_camera(&m, "camera", &mpath)?,
        heatmap_camera: parse_camera(&m, "heatmap_camera", &mpath)?,
        amodal: io::read_mask(&dir.join("amodal.pgm"), MaskKind::Amodal)?,
        visible: io::read_mask(&dir.join("visible.pgm"), MaskKind::Visible)?,
        hand_heatmaps: read_heatmaps(dir, "hand")?,
        object_heatmap: read_heatmaps(dir, "object")?,
        grids,
        global: GlobalFeature(DVector::from_vec(global.to_f64())),
    })
}

pub fn write_index(dataset: &Path, entries: &[(String, Split)]) -> Result<()> {
    let mut m = Manifest::new();
    for (id, split) in entries {
        m.insert(id.clone(), split.name())?;
    }
    io::write_manifest(&m, &dataset.join(INDEX))?;
    Ok(())
}

/// Sample ids and splits in index order.
pub fn read_index(dataset: &Path) -> Result<Vec<(String, Split, PathBuf)>> {
    let path = dataset.join(INDEX);
    let m = io::read_manifest(&path).with_context(|| format!("reading dataset index under {}", dataset.display()))?;
    m.entries()
        .iter()
        .map(|(id, s)| {
            let split = Split::parse(s).with_context(|| format!("{}: bad split '{s}' for {id}", path.display()))?;
            Ok((id.clone(), split, dataset.join(id)))
        })
        .collect()
}

/// 4×4 homogeneous matrix with the scale folded into the upper-left block.
pub fn transform_tensor(t: &hoi_core::SimilarityTransform) -> Tensor {
    Tensor::from_matrix(&DMatrix::from_iterator(4, 4, t.to_homogeneous().iter().copied()))
}

pub fn tensor_transform(t: &Tensor, path: &Path) -> Result<hoi_core::SimilarityTransform> {
    if t.shape() != [4, 4] {
        bail!("{}: transform must be 4×4, found {:?}", path.display(), t.shape());
    }
    let m = t.to_matrix()?;
    let h = nalgebra::Matrix4::from_iterator(m.iter().copied());
    Ok(hoi_core::SimilarityTransform::from_homogeneous(&h)?)
}

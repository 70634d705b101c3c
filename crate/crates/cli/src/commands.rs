use crate::config::{PriorSource, RunConfig};
use crate::dataset::{self, read_index, read_sample, sample_id, Split, StoredSample};
use crate::output::Staged;
use crate::{plot, stats};
use anyhow::{anyhow, bail, Context, Result};
use hoi_core::fusion::{refine, train_refiner, FusionConfig, FusionParams, RefinerSample};
use hoi_core::geom::chamfer;
use hoi_core::hand::{inverse_kinematics, skin, HandSkeleton, HandSurface, IkOptions};
use hoi_core::io::{self, Manifest, PlyFormat, Tensor};
use hoi_core::losses::{evaluate, occlusion_binned_report, EvalOptions, EvalSample};
use hoi_core::pipeline::{place_prior, pose_terms_from, predict_pose_from, register_prior};
use hoi_core::registration::{sphere_prior, CorrespondenceMap, PrototypeLibrary};
use hoi_core::synth::{default_library, make_scene, synth_features, Shape};
use hoi_core::PointCloud;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Resolved global options.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Ctx {
    pub fn dataset_dir(&self) -> PathBuf {
        self.out.join("dataset")
    }

    pub fn priors_dir(&self) -> PathBuf {
        self.out.join("priors")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.out.join("model")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out.join("eval")
    }

    pub fn occlusion_dir(&self) -> PathBuf {
        self.out.join("occlusion")
    }
}

fn scene_seed(base: u64, index: usize) -> u64 {
    (base << 32) | index as u64
}

pub fn synth_gen(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let scene_cfg = cfg.scene_config();
    let fusion = cfg.fusion_config();
    let feats = cfg.feature_settings();
    let n = cfg.data.samples;
    let n_train = cfg.n_train();
    let staged = Staged::new(&ctx.dataset_dir())?;
    let root = staged.path().to_path_buf();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(String, Split, f64)> {
            let id = sample_id(i);
            let split = if i < n_train { Split::Train } else { Split::Test };
            let scene = make_scene(&scene_cfg, scene_seed(cfg.seed, i))?;
            let (grids, global) =
                synth_features(&scene, &fusion, feats.seed, feats.splat_radius, feats.occluder_splat_radius)?;
            dataset::write_sample(&root.join(&id), &id, split, &scene, &grids, &global)
                .with_context(|| format!("writing sample {id}"))?;
            Ok((id, split, scene.occlusion_rate()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let entries: Vec<(String, Split)> = rows.iter().map(|(id, s, _)| (id.clone(), *s)).collect();
    dataset::write_index(&root, &entries)?;
    let rates: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let q = stats::quartiles(&rates);
    let mut summary = Manifest::new();
    summary.insert("samples", n)?;
    summary.insert("train", n_train)?;
    summary.insert("test", n - n_train)?;
    summary.insert("seed", cfg.seed)?;
    summary.insert("occlusion_q1", q[0])?;
    summary.insert("occlusion_median", q[1])?;
    summary.insert("occlusion_q3", q[2])?;
    io::write_manifest(&summary, &root.join("summary.tsv"))?;
    let dest = staged.commit()?;
    println!(
        "synth-gen: {n} samples ({n_train} train, {} test) in {}; occlusion quartiles {} {} {}",
        n - n_train,
        dest.display(),
        q[0],
        q[1],
        q[2]
    );
    Ok(())
}

fn load_library(cfg: &RunConfig) -> Result<PrototypeLibrary<f64>> {
    let dir = &cfg.prior.library_dir;
    if dir.as_os_str().is_empty() {
        return Ok(default_library(cfg.prior.points, cfg.seed)?);
    }
    let manifest = io::read_manifest(&dir.join("manifest.tsv"))?;
    let mut lib = PrototypeLibrary::new();
    for (label, file) in manifest.entries() {
        lib.insert(label.clone(), io::read_cloud(&dir.join(file))?)?;
    }
    Ok(lib)
}

fn raw_prior(source: PriorSource, s: &StoredSample, cfg: &RunConfig, lib: Option<&PrototypeLibrary<f64>>) -> Result<PointCloud> {
    Ok(match source {
        PriorSource::Sphere => sphere_prior(cfg.prior.points, cfg.prior.sphere_radius, s.seed)?,
        PriorSource::Library => lib.expect("library loaded").get(s.category.name())?.clone(),
        PriorSource::SelfPrior => s.object.clone(),
    })
}

enum RegOutcome {
    Registered { chamfer_mm2: f64, mse: f64 },
    Placed,
    Failed(String),
}

pub fn register(ctx: &Ctx, source: Option<PriorSource>, dataset: Option<&Path>) -> Result<()> {
    let cfg = &ctx.cfg;
    let source = source.or(cfg.prior_source()).ok_or_else(|| anyhow!("unknown prior source"))?;
    let dataset = dataset.map_or_else(|| ctx.dataset_dir(), Path::to_path_buf);
    let index = read_index(&dataset)?;
    let lib = match source {
        PriorSource::Library => Some(load_library(cfg)?),
        _ => None,
    };
    let icp = cfg.icp_options();
    let staged = Staged::new(&ctx.priors_dir())?;
    let root = staged.path().to_path_buf();
    let outcomes = index
        .par_iter()
        .map(|(id, split, dir)| -> Result<RegOutcome> {
            let s = read_sample(dir)?;
            let prior = raw_prior(source, &s, cfg, lib.as_ref())?;
            let out = root.join(id);
            std::fs::create_dir_all(&out)?;
            match split {
                Split::Train => match register_prior(&prior, &s.object, &icp) {
                    Ok(reg) => {
                        io::write_cloud(&prior, &out.join("prior.ply"), PlyFormat::BinaryLittleEndian)?;
                        io::write_tensor(&dataset::transform_tensor(&reg.transform), &out.join("transform.tensor"))?;
                        let idx: Vec<f64> = reg.correspondence.indices().iter().map(|&i| i as f64).collect();
                        io::write_tensor(&Tensor::from_f64(vec![idx.len()], &idx)?, &out.join("correspondence.tensor"))?;
                        let mm = |c: &PointCloud| c.scaled(1000.0);
                        Ok(RegOutcome::Registered {
                            chamfer_mm2: chamfer(&mm(&reg.aligned), &mm(&s.object))?,
                            mse: reg.mse,
                        })
                    }
                    Err(e) => {
                        log::warn!("sample {id}: registration failed: {e}");
                        Ok(RegOutcome::Failed(e.to_string()))
                    }
                },
                Split::Test => {
                    let placed = match source {
                        PriorSource::SelfPrior => prior,
                        _ => {
                            let pred = predict_pose_from(&s.hand_heatmaps, &s.object_heatmap, &s.heatmap_camera)?;
                            place_prior(&prior, &pred.object_center, &Shape::canonical(s.category))?
                        }
                    };
                    io::write_cloud(&placed, &out.join("prior.ply"), PlyFormat::BinaryLittleEndian)?;
                    Ok(RegOutcome::Placed)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = String::from("id\tsplit\tstatus\tchamfer_mm2\tmse\n");
    let mut cds = Vec::new();
    let mut failed = 0;
    for ((id, split, _), o) in index.iter().zip(&outcomes) {
        let (status, cd, mse) = match o {
            RegOutcome::Registered { chamfer_mm2, mse } => {
                cds.push(*chamfer_mm2);
                ("registered".to_string(), chamfer_mm2.to_string(), mse.to_string())
            }
            RegOutcome::Placed => ("placed".to_string(), String::new(), String::new()),
            RegOutcome::Failed(e) => {
                failed += 1;
                (format!("failed: {}", e.replace(['\t', '\n'], " ")), String::new(), String::new())
            }
        };
        table.push_str(&format!("{id}\t{}\t{status}\t{cd}\t{mse}\n", split.name()));
    }
    io::write_atomic(&root.join("registration.tsv"), table.as_bytes())?;
    let mean = if cds.is_empty() {
        f64::NAN
    } else {
        cds.iter().sum::<f64>() / cds.len() as f64
    };
    let mut summary = Manifest::new();
    summary.insert("source", &cfg_source_name(source))?;
    summary.insert("registered", cds.len())?;
    summary.insert("failed", failed)?;
    summary.insert("mean_chamfer_mm2", mean)?;
    io::write_manifest(&summary, &root.join("summary.tsv"))?;
    let dest = staged.commit()?;
    println!(
        "register: source {} registered {} failed {failed} mean post-ICP chamfer {mean} mm^2 -> {}",
        cfg_source_name(source),
        cds.len(),
        dest.display()
    );
    Ok(())
}

fn cfg_source_name(s: PriorSource) -> String {
    match s {
        PriorSource::Sphere => "sphere",
        PriorSource::Library => "library",
        PriorSource::SelfPrior => "self",
    }
    .into()
}

/// Prior for a sample as the refiner sees it: ICP-aligned for training
/// samples, the placed prior for test samples.
fn stored_prior(priors: &Path, id: &str, split: Split) -> Result<(PointCloud, Option<CorrespondenceMap>)> {
    let dir = priors.join(id);
    let prior = io::read_cloud(&dir.join("prior.ply"))?;
    match split {
        Split::Test => Ok((prior, None)),
        Split::Train => {
            let tpath = dir.join("transform.tensor");
            let t = dataset::tensor_transform(&io::read_tensor(&tpath)?, &tpath)?;
            let idx = io::read_tensor(&dir.join("correspondence.tensor"))?;
            let corr = CorrespondenceMap::new(idx.data().iter().map(|&v| v as usize).collect(), prior.len())?;
            Ok((t.apply(&prior), Some(corr)))
        }
    }
}

fn training_sample(s: &StoredSample, priors: &Path, cfg: &FusionConfig) -> Result<RefinerSample> {
    let (prior, corr) = stored_prior(priors, &s.id, Split::Train)?;
    let l2 = &cfg.levels[1];
    let pred = predict_pose_from(&s.hand_heatmaps, &s.object_heatmap, &s.heatmap_camera)?;
    Ok(RefinerSample {
        id: s.id.clone(),
        prior,
        target: s.object.clone(),
        correspondence: corr.expect("train split has correspondences"),
        camera: s.camera,
        grids: s.grids.clone(),
        global: s.global.clone(),
        mask_target: s.amodal.downsample(l2.grid_w, l2.grid_h)?,
        pose_terms: pose_terms_from(&pred, &s.hand_joints, &s.object_center, cfg.loss_unit)?,
    })
}

pub fn train(ctx: &Ctx, dataset: Option<&Path>, priors: Option<&Path>) -> Result<()> {
    let fusion = ctx.cfg.fusion_config();
    let tcfg = ctx.cfg.train_config();
    let dataset = dataset.map_or_else(|| ctx.dataset_dir(), Path::to_path_buf);
    let priors = priors.map_or_else(|| ctx.priors_dir(), Path::to_path_buf);
    let index = read_index(&dataset)?;
    let loaded = index
        .par_iter()
        .filter(|(_, split, _)| *split == Split::Train)
        .map(|(id, _, dir)| -> Result<Option<RefinerSample>> {
            let s = read_sample(dir)?;
            if !priors.join(id).join("transform.tensor").is_file() {
                log::warn!("sample {id}: no registration, skipped");
                return Ok(None);
            }
            training_sample(&s, &priors, &fusion).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<RefinerSample> = loaded.into_iter().flatten().collect();
    if samples.is_empty() {
        bail!("no registered training samples under {}", priors.display());
    }
    let out = train_refiner(&samples, &fusion, &tcfg, None)?;
    let staged = Staged::new(&ctx.model_dir())?;
    io::write_params(&out.params, &staged.path().join("params"))?;
    io::write_atomic(&staged.path().join("trace.tsv"), io::encode_trace(&out.trace).as_bytes())?;
    let dest = staged.commit()?;
    match out.trace.last() {
        Some(r) => println!(
            "train: {} samples, {} epochs, final total {} -> {}",
            samples.len(),
            out.trace.len(),
            r.breakdown.total,
            dest.display()
        ),
        None => println!("train: zero epochs, initial parameters written to {}", dest.display()),
    }
    Ok(())
}

pub struct EvalArgs {
    pub dataset: Option<PathBuf>,
    pub priors: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub centered: bool,
    pub thresholds: Option<Vec<f64>>,
    pub hand_thresholds: Option<Vec<f64>>,
    pub prior_only: bool,
    pub inject_gt: bool,
    pub all_splits: bool,
}

fn predicted_hand(s: &StoredSample, skeleton: &HandSkeleton, surface: &HandSurface) -> Result<PointCloud> {
    let pred = predict_pose_from(&s.hand_heatmaps, &s.object_heatmap, &s.heatmap_camera)?;
    let ik = inverse_kinematics(&pred.joints, skeleton, &IkOptions::default())?;
    Ok(skin(skeleton, &ik.pose, surface))
}

pub fn eval(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let fusion = ctx.cfg.fusion_config();
    let mut opts: EvalOptions = ctx.cfg.eval_options();
    opts.centered |= args.centered;
    if let Some(t) = &args.thresholds {
        opts.object_thresholds_mm = t.clone();
    }
    if let Some(t) = &args.hand_thresholds {
        opts.hand_thresholds_mm = t.clone();
    }
    let dataset = args.dataset.clone().unwrap_or_else(|| ctx.dataset_dir());
    let priors = args.priors.clone().unwrap_or_else(|| ctx.priors_dir());
    let needs_params = !args.prior_only && !args.inject_gt;
    let params: Option<FusionParams> = if needs_params {
        let dir = args.params.clone().unwrap_or_else(|| ctx.model_dir().join("params"));
        if !dir.join(io::PARAMS_MANIFEST).is_file() {
            bail!(
                "no trained parameters at {} (train first, or pass --prior-only)",
                dir.display()
            );
        }
        Some(io::read_params(&dir, &fusion)?)
    } else {
        None
    };
    let skeleton = HandSkeleton::default();
    let surface = HandSurface::template(&skeleton);
    let index = read_index(&dataset)?;
    let samples = index
        .par_iter()
        .filter(|(_, split, _)| args.all_splits || *split == Split::Test)
        .map(|(id, split, dir)| -> Result<EvalSample> {
            let s = read_sample(dir)?;
            let occlusion = s.occlusion_rate()?;
            if args.inject_gt {
                return Ok(EvalSample {
                    id: id.clone(),
                    pred_object: s.object.clone(),
                    gt_object: s.object,
                    pred_hand: s.hand.clone(),
                    gt_hand: s.hand,
                    occlusion,
                });
            }
            let (prior, _) = stored_prior(&priors, id, *split).with_context(|| format!("prior for sample {id}"))?;
            let pred_object = match &params {
                Some(p) => refine(p, &fusion, &prior, &s.grids, &s.global)?,
                None => prior,
            };
            Ok(EvalSample {
                id: id.clone(),
                pred_object,
                pred_hand: predicted_hand(&s, &skeleton, &surface)?,
                gt_object: s.object,
                gt_hand: s.hand,
                occlusion,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        bail!("no samples to evaluate in {}", dataset.display());
    }
    let report = evaluate(&samples, &opts)?;
    let staged = Staged::new(&ctx.eval_dir())?;
    io::write_report(&report, &staged.path().join("report.tsv"))?;
    let dest = staged.commit()?;
    let a = &report.aggregate;
    println!(
        "eval: {} samples, median CD object {} mm^2, hand {} mm^2, mean F object {:?}, hand {:?} -> {}",
        report.samples.len(),
        a.median_cd_object,
        a.median_cd_hand,
        a.mean_fs_object,
        a.mean_fs_hand,
        dest.join("report.tsv").display()
    );
    Ok(())
}

pub fn occlusion_report(ctx: &Ctx, report: Option<&Path>) -> Result<()> {
    let path = report.map_or_else(|| ctx.eval_dir().join("report.tsv"), Path::to_path_buf);
    let report = io::read_report(&path)?;
    let rates: Vec<f64> = report.samples.iter().map(|s| s.occlusion).collect();
    let cds: Vec<f64> = report.samples.iter().map(|s| s.cd_object).collect();
    let bins = occlusion_binned_report(&rates, &cds)?;
    let staged = Staged::new(&ctx.occlusion_dir())?;
    io::write_atomic(&staged.path().join("deciles.tsv"), io::encode_occlusion_table(&bins).as_bytes())?;
    io::write_atomic(&staged.path().join("deciles.svg"), plot::decile_svg(&bins).as_bytes())?;
    let dest = staged.commit()?;
    println!("occlusion-report: {} samples in 10 deciles -> {}", rates.len(), dest.display());
    for (i, b) in bins.iter().enumerate() {
        println!(
            "  decile {:2}  rate [{:.4}, {:.4}]  n {:3}  median CD {}",
            i + 1,
            b.min_rate,
            b.max_rate,
            b.count,
            b.median_cd
        );
    }
    Ok(())
}

//! Run configuration: TOML with `[sections]`, every key optional, unknown keys rejected.

use hoi_core::fusion::{FusionConfig, LevelConfig, TrainConfig};
use hoi_core::losses::EvalOptions;
use hoi_core::pipeline::FeatureSettings;
use hoi_core::registration::IcpOptions;
use hoi_core::synth::{SceneConfig, ShapeFamily};
use hoi_core::Error;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataSection,
    pub prior: PriorSection,
    pub icp: IcpSection,
    pub features: FeatureSection,
    pub fusion: FusionSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub samples: usize,
    /// Fraction of samples (taken from the end) held out as the test split.
    pub test_fraction: f64,
    pub families: Vec<String>,
    pub object_points: usize,
    pub image_size: usize,
    pub focal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    /// `sphere`, `library` or `self`.
    pub source: String,
    pub points: usize,
    pub sphere_radius: f64,
    /// Directory with `manifest.tsv` (`label<TAB>file.ply`); empty uses the built-in prototypes.
    pub library_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpSection {
    pub max_iterations: usize,
    pub convergence_eps: f64,
    pub estimate_scale: bool,
    pub restart_grid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub seed: u64,
    pub splat_radius: f64,
    pub occluder_splat_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub fine_patches: usize,
    pub fine_grid: usize,
    pub fine_stride: f64,
    pub fine_channels: usize,
    pub coarse_patches: usize,
    pub coarse_grid: usize,
    pub coarse_stride: f64,
    pub coarse_channels: usize,
    pub encoder_dim: usize,
    pub attention_hidden: usize,
    pub decoder_hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub finetune_epochs: usize,
    pub finetune_learning_rate: f64,
    pub freeze_attention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub object_thresholds_mm: Vec<f64>,
    pub hand_thresholds_mm: Vec<f64>,
    pub centered: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("run"),
            data: DataSection::default(),
            prior: PriorSection::default(),
            icp: IcpSection::default(),
            features: FeatureSection::default(),
            fusion: FusionSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        let s = SceneConfig::default();
        Self {
            samples: 60,
            test_fraction: 0.2,
            families: vec!["box".into(), "can".into()],
            object_points: s.object_points,
            image_size: s.image_size,
            focal: s.focal,
        }
    }
}

impl Default for PriorSection {
    fn default() -> Self {
        Self {
            source: "sphere".into(),
            points: 512,
            sphere_radius: 1.0,
            library_dir: PathBuf::new(),
        }
    }
}

impl Default for IcpSection {
    fn default() -> Self {
        let o = IcpOptions::<f64>::default();
        Self {
            max_iterations: o.max_iterations,
            convergence_eps: o.convergence_eps,
            estimate_scale: o.estimate_scale,
            restart_grid: o.restart_grid,
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        let f = FeatureSettings::default();
        Self {
            seed: f.seed,
            splat_radius: f.splat_radius,
            occluder_splat_radius: f.occluder_splat_radius,
        }
    }
}

impl Default for FusionSection {
    fn default() -> Self {
        let c = FusionConfig::default();
        let [l1, l2] = &c.levels;
        Self {
            fine_patches: l1.patches,
            fine_grid: l1.grid_w,
            fine_stride: l1.stride,
            fine_channels: l1.channels,
            coarse_patches: l2.patches,
            coarse_grid: l2.grid_w,
            coarse_stride: l2.stride,
            coarse_channels: l2.channels,
            encoder_dim: c.encoder_dim,
            attention_hidden: c.attention_hidden,
            decoder_hidden: c.decoder_hidden,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 5e-5,
            batch_size: 8,
            finetune_epochs: 25,
            finetune_learning_rate: 1e-5,
            freeze_attention: true,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalOptions::default();
        Self {
            object_thresholds_mm: e.object_thresholds_mm,
            hand_thresholds_mm: e.hand_thresholds_mm,
            centered: e.centered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorSource {
    Sphere,
    Library,
    SelfPrior,
}

impl PriorSource {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sphere" => Some(Self::Sphere),
            "library" => Some(Self::Library),
            "self" => Some(Self::SelfPrior),
            _ => None,
        }
    }
}

/// Keys present in `user` but absent from `known`, as dotted paths.
fn unknown_keys(user: &toml::Table, known: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in user {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (v, known.get(k)) {
            (_, None) => out.push(format!("{path}: unknown key")),
            (toml::Value::Table(u), Some(toml::Value::Table(kn))) => unknown_keys(u, kn, &path, out),
            _ => {}
        }
    }
}

impl RunConfig {
    /// Parses and validates, reporting every problem found at once.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, Error> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(vec![format!("{}: {}", origin.display(), e.message())]))?;
        let known = toml::Table::try_from(RunConfig::default()).expect("default config serializes");
        let mut errs = Vec::new();
        unknown_keys(&user, &known, "", &mut errs);
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let cfg: RunConfig = user
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => {
                let cfg = Self::default();
                cfg.validate()?;
                Ok(cfg)
            }
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                let mut cfg = Self::from_toml(&text, p)?;
                if cfg.prior.library_dir.is_relative() && !cfg.prior.library_dir.as_os_str().is_empty() {
                    if let Some(dir) = p.parent() {
                        cfg.prior.library_dir = dir.join(&cfg.prior.library_dir);
                    }
                }
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn families(&self) -> Vec<Result<ShapeFamily, String>> {
        self.data
            .families
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.parse::<ShapeFamily>()
                    .map_err(|_| format!("data.families[{i}]: unknown shape family '{f}'"))
            })
            .collect()
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            families: self.families().into_iter().filter_map(Result::ok).collect(),
            object_points: self.data.object_points,
            image_size: self.data.image_size,
            focal: self.data.focal,
            ..SceneConfig::default()
        }
    }

    pub fn prior_source(&self) -> Option<PriorSource> {
        PriorSource::parse(&self.prior.source)
    }

    pub fn icp_options(&self) -> IcpOptions<f64> {
        IcpOptions {
            max_iterations: self.icp.max_iterations,
            convergence_eps: self.icp.convergence_eps,
            estimate_scale: self.icp.estimate_scale,
            restart_grid: self.icp.restart_grid,
            ..IcpOptions::default()
        }
    }

    pub fn feature_settings(&self) -> FeatureSettings {
        FeatureSettings {
            seed: self.features.seed,
            splat_radius: self.features.splat_radius,
            occluder_splat_radius: self.features.occluder_splat_radius,
        }
    }

    pub fn fusion_config(&self) -> FusionConfig {
        let f = &self.fusion;
        let level = |patches, grid, stride, channels| LevelConfig {
            patches,
            grid_h: grid,
            grid_w: grid,
            stride,
            channels,
        };
        FusionConfig {
            levels: [
                level(f.fine_patches, f.fine_grid, f.fine_stride, f.fine_channels),
                level(f.coarse_patches, f.coarse_grid, f.coarse_stride, f.coarse_channels),
            ],
            encoder_dim: f.encoder_dim,
            attention_hidden: f.attention_hidden,
            decoder_hidden: f.decoder_hidden,
            ..FusionConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            finetune_epochs: t.finetune_epochs,
            finetune_learning_rate: t.finetune_learning_rate,
            freeze_attention: t.freeze_attention,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            object_thresholds_mm: self.eval.object_thresholds_mm.clone(),
            hand_thresholds_mm: self.eval.hand_thresholds_mm.clone(),
            centered: self.eval.centered,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let mut errs: Vec<String> = Vec::new();
        let mut absorb = |r: hoi_core::Result<()>| match r {
            Ok(()) => {}
            Err(Error::Config(list)) => errs.extend(list),
            Err(e) => errs.push(e.to_string()),
        };
        absorb(self.scene_config().validate());
        absorb(self.icp_options().validate());
        absorb(self.fusion_config().validate());
        absorb(self.train_config().validate());
        for f in self.families() {
            if let Err(e) = f {
                errs.push(e);
            }
        }
        if self.data.families.is_empty() {
            errs.push("data.families: at least one family is required".into());
        }
        if self.data.samples == 0 {
            errs.push("data.samples: must be positive".into());
        }
        if !(0.0..1.0).contains(&self.data.test_fraction) {
            errs.push(format!("data.test_fraction: {} not in [0, 1)", self.data.test_fraction));
        }
        match self.prior_source() {
            None => errs.push(format!(
                "prior.source: unknown source '{}' (expected sphere, library or self)",
                self.prior.source
            )),
            Some(PriorSource::Library) if !self.prior.library_dir.as_os_str().is_empty() => {
                if !self.prior.library_dir.join("manifest.tsv").is_file() {
                    errs.push(format!(
                        "prior.library_dir: no manifest.tsv under {}",
                        self.prior.library_dir.display()
                    ));
                }
            }
            _ => {}
        }
        if self.prior.points < 8 {
            errs.push("prior.points: need at least 8".into());
        }
        if !(self.prior.sphere_radius > 0.0) {
            errs.push("prior.sphere_radius: must be positive".into());
        }
        for (key, list) in [
            ("eval.object_thresholds_mm", &self.eval.object_thresholds_mm),
            ("eval.hand_thresholds_mm", &self.eval.hand_thresholds_mm),
        ] {
            if list.is_empty() || list.iter().any(|t| !(*t > 0.0)) {
                errs.push(format!("{key}: need one or more positive thresholds"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn n_train(&self) -> usize {
        let n = self.data.samples;
        n - ((n as f64 * self.data.test_fraction).round() as usize).min(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_toml(&text, Path::new("c")).unwrap(), RunConfig::default());
    }

    #[test]
    fn every_problem_is_listed() {
        let text = "bogus = 1\n[data]\nfamilies = [\"box\", \"cone\"]\nnope = 2\n";
        let Err(Error::Config(errs)) = RunConfig::from_toml(text, Path::new("c")) else {
            panic!("expected config error")
        };
        assert_eq!(errs.len(), 2, "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("bogus")));
        assert!(errs.iter().any(|e| e.starts_with("data.nope")));

        let text = "[data]\nfamilies = [\"box\", \"cone\"]\nsamples = 0\n[prior]\nsource = \"blob\"\n";
        let Err(Error::Config(errs)) = RunConfig::from_toml(text, Path::new("c")) else {
            panic!("expected config error")
        };
        assert!(errs.iter().any(|e| e.contains("data.families[1]") && e.contains("cone")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("data.samples")));
        assert!(errs.iter().any(|e| e.contains("prior.source")));
    }

    #[test]
    fn split_sizes() {
        let mut c = RunConfig::default();
        c.data.samples = 10;
        c.data.test_fraction = 0.25;
        assert_eq!(c.n_train(), 7);
        c.data.test_fraction = 0.0;
        assert_eq!(c.n_train(), 10);
    }
}

//! Parameter archives: a manifest mapping tensor name to file, one tensor file each.

use super::manifest::{read_manifest, write_manifest, Manifest};
use super::tensor::{read_tensor, write_tensor, Tensor};
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionParams};
use std::path::Path;

pub const PARAMS_MANIFEST: &str = "params.tsv";

/// Writes every tensor as `<name>.tensor` under `dir`, then the manifest last.
pub fn write_params(params: &FusionParams, dir: &Path) -> Result<()> {
    let mut manifest = Manifest::new();
    for spec in params.specs() {
        let file = format!("{}.tensor", spec.name);
        let t = Tensor::from_f64(spec.shape.clone(), params.slice(&spec.name))?;
        write_tensor(&t, &dir.join(&file))?;
        manifest.insert(spec.name.clone(), file)?;
    }
    write_manifest(&manifest, &dir.join(PARAMS_MANIFEST))
}

/// Reads an archive and checks it against the shapes implied by `cfg`.
pub fn read_params(dir: &Path, cfg: &FusionConfig) -> Result<FusionParams> {
    let mpath = dir.join(PARAMS_MANIFEST);
    let manifest = read_manifest(&mpath)?;
    let mut tensors = Vec::with_capacity(manifest.len());
    for (name, file) in manifest.entries() {
        if file.contains(['/', '\\']) || file == ".." {
            return Err(Error::format(&mpath, format!("tensor '{name}' points outside the archive: {file}")));
        }
        let t = read_tensor(&dir.join(file))?;
        tensors.push((name.clone(), t.shape().to_vec(), t.to_f64()));
    }
    FusionParams::from_tensors(cfg, &tensors)
}

/// Rounds every value through f32, giving exactly what a write/read cycle yields.
pub fn narrow_params(params: &FusionParams) -> FusionParams {
    let mut p = params.clone();
    for v in p.values_mut() {
        *v = *v as f32 as f64;
    }
    p
}

//! `manifest.json` + `params.bin` (little-endian f64, declaration order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::Params;
use super::tensor::Tensor;
use super::AutodiffError;
use crate::io::{bytes_to_f64s, sha256_hex, write_f64s, write_json};

pub const CHECKPOINT_FORMAT: &str = "romlab-params-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub kind: String,
    pub seed: u64,
    pub dtype: String,
    pub hyperparameters: serde_json::Value,
    pub params: Vec<ParamEntry>,
    pub sha256: String,
}

pub fn save_params(
    dir: &Path,
    kind: &str,
    seed: u64,
    hyperparameters: serde_json::Value,
    params: &Params,
) -> Result<CheckpointManifest, AutodiffError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(params.len());
    let mut offset = 0;
    for (name, t) in params.names().iter().zip(params.tensors()) {
        entries.push(ParamEntry { name: name.clone(), shape: t.shape().to_vec(), offset });
        offset += t.len();
    }
    let sha256 = write_f64s(&dir.join("params.bin"), &params.flat())?;
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        kind: kind.into(),
        seed,
        dtype: "float64-little-endian".into(),
        hyperparameters,
        params: entries,
        sha256,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_params(dir: &Path) -> Result<(CheckpointManifest, Params), AutodiffError> {
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(AutodiffError::Checkpoint(format!("unknown format {:?}", manifest.format)));
    }
    let bytes = fs::read(dir.join("params.bin"))?;
    if sha256_hex(&bytes) != manifest.sha256 {
        return Err(AutodiffError::Checkpoint("params.bin checksum mismatch".into()));
    }
    let flat = bytes_to_f64s(&bytes).ok_or_else(|| AutodiffError::Checkpoint("params.bin is not a whole number of f64s".into()))?;
    let mut params = Params::new();
    let mut expected = 0;
    for e in &manifest.params {
        if e.offset != expected {
            return Err(AutodiffError::Checkpoint(format!("parameter {} has offset {}, expected {expected}", e.name, e.offset)));
        }
        let n: usize = e.shape.iter().product();
        let end = e.offset + n;
        if end > flat.len() {
            return Err(AutodiffError::Checkpoint(format!("parameter {} runs past the end of params.bin", e.name)));
        }
        params.add(e.name.clone(), Tensor::new(&e.shape, flat[e.offset..end].to_vec())?);
        expected = end;
    }
    if expected != flat.len() {
        return Err(AutodiffError::Checkpoint(format!("params.bin holds {} values, manifest declares {expected}", flat.len())));
    }
    Ok((manifest, params))
}

/// Copies loaded values into an already-constructed parameter set, checking
/// names and shapes.
pub fn restore_into(target: &mut Params, loaded: &Params) -> Result<(), AutodiffError> {
    if target.len() != loaded.len() {
        return Err(AutodiffError::Checkpoint(format!("expected {} tensors, checkpoint has {}", target.len(), loaded.len())));
    }
    for i in 0..target.len() {
        let (tn, ln) = (&target.names()[i], &loaded.names()[i]);
        let (ts, ls) = (target.tensors()[i].shape().to_vec(), loaded.tensors()[i].shape());
        if tn != ln || ts != ls {
            return Err(AutodiffError::Checkpoint(format!("tensor {i}: expected {tn} {ts:?}, found {ln} {ls:?}")));
        }
    }
    target.set_flat(&loaded.flat());
    Ok(())
}

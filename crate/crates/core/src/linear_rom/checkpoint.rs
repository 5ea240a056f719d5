//! `manifest.json` plus one little-endian f64 file per matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{bytes_to_f64s, sha256_hex, write_f64s, write_json};
use crate::linalg::DenseMatrix;
use crate::pde::ArrayEntry;

use super::dmdc::LinearROM;
use super::LinearRomError;

pub const LINEAR_ROM_FORMAT: &str = "romlab-linear-rom-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRomManifest {
    pub format: String,
    pub kind: String,
    pub dtype: String,
    pub hyperparameters: serde_json::Value,
    pub e: ArrayEntry,
    pub d: ArrayEntry,
    pub a_r: ArrayEntry,
    pub b_r: ArrayEntry,
}

fn write_matrix(dir: &Path, name: &str, m: &DenseMatrix) -> Result<ArrayEntry, LinearRomError> {
    let file = format!("{name}.bin");
    let sha256 = write_f64s(&dir.join(&file), m.as_slice())?;
    Ok(ArrayEntry { file, shape: vec![m.rows(), m.cols()], sha256 })
}

fn read_matrix(dir: &Path, name: &str, entry: &ArrayEntry) -> Result<DenseMatrix, LinearRomError> {
    let bad = |msg: String| LinearRomError::Checkpoint(format!("{name}: {msg}"));
    let [rows, cols] = entry.shape[..] else {
        return Err(bad(format!("expected a 2-D shape, got {:?}", entry.shape)));
    };
    let bytes = fs::read(dir.join(&entry.file))?;
    if bytes.len() != rows * cols * 8 {
        return Err(bad(format!("shape {:?} needs {} bytes, file has {}", entry.shape, rows * cols * 8, bytes.len())));
    }
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(bad("checksum mismatch".into()));
    }
    let values = bytes_to_f64s(&bytes).expect("length checked");
    Ok(DenseMatrix::from_vec(rows, cols, values)?)
}

pub fn save_linear_rom(
    dir: &Path,
    kind: &str,
    hyperparameters: serde_json::Value,
    rom: &LinearROM,
) -> Result<LinearRomManifest, LinearRomError> {
    fs::create_dir_all(dir)?;
    let manifest = LinearRomManifest {
        format: LINEAR_ROM_FORMAT.into(),
        kind: kind.into(),
        dtype: "float64-little-endian".into(),
        hyperparameters,
        e: write_matrix(dir, "e", &rom.e)?,
        d: write_matrix(dir, "d", &rom.d)?,
        a_r: write_matrix(dir, "a_r", &rom.a_r)?,
        b_r: write_matrix(dir, "b_r", &rom.b_r)?,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_linear_rom(dir: &Path) -> Result<(LinearRomManifest, LinearROM), LinearRomError> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: LinearRomManifest = serde_json::from_str(&text).map_err(|e| LinearRomError::Checkpoint(e.to_string()))?;
    if m.format != LINEAR_ROM_FORMAT {
        return Err(LinearRomError::Checkpoint(format!("unknown format {:?}", m.format)));
    }
    let rom = LinearROM::new(
        read_matrix(dir, "e", &m.e)?,
        read_matrix(dir, "d", &m.d)?,
        read_matrix(dir, "a_r", &m.a_r)?,
        read_matrix(dir, "b_r", &m.b_r)?,
    )?;
    Ok((m, rom))
}

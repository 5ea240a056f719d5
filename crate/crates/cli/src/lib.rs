//! Config-driven pipeline behind the `romlab` binary: data generation, model
//! and controller training, prediction and control evaluation, mode export.

pub mod config;
mod eval;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use romlab::io::write_json;
use romlab::pde::{generate_dataset, save_dataset, TEST_STREAM_OFFSET};

pub use eval::{cmd_eval_ctrl, cmd_eval_pred, cmd_modes, nmse_curve, write_nmse_csv, NmseRow, Predictor};
pub use train::{cmd_train, cmd_train_ctrl};

use config::{check_schema, resolve, GenDataConfig};

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Creates the output directory and records the effective configuration in it.
pub(crate) fn prepare_out<T: Serialize>(out: &Path, resolved: &T) -> Result<PathBuf> {
    let dir = resolve(out);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join(RESOLVED_CONFIG), resolved)?;
    Ok(dir)
}

#[derive(Serialize)]
struct GenDataReport {
    train: romlab::pde::DatasetManifest,
    test: romlab::pde::DatasetManifest,
}

/// Training and test sets from disjoint random streams of one seed.
pub fn cmd_gen_data(mut cfg: GenDataConfig, ov: &Overrides) -> Result<PathBuf> {
    check_schema(cfg.schema_version)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(o) = &ov.out {
        cfg.out = o.clone();
    }
    cfg.grid.validate()?;
    cfg.sim.validate()?;
    let dir = prepare_out(&cfg.out, &cfg)?;
    log::info!("generating {} training and {} test sequences (seed {})", cfg.count, cfg.test_count, cfg.seed);
    let train = generate_dataset(cfg.count, cfg.steps, cfg.seed, 0, &cfg.sim, &cfg.grid)?;
    let train_m = save_dataset(&train, &dir.join("train"))?;
    let test = generate_dataset(cfg.test_count, cfg.steps, cfg.seed, TEST_STREAM_OFFSET, &cfg.sim, &cfg.grid)?;
    let test_m = save_dataset(&test, &dir.join("test"))?;
    log::info!("train states sha256 {}, test states sha256 {}", train_m.states.sha256, test_m.states.sha256);
    write_json(&dir.join("report.json"), &GenDataReport { train: train_m, test: test_m })?;
    Ok(dir)
}

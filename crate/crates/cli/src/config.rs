//! Per-command JSON configurations. Every key is optional; unknown keys and
//! foreign schema versions are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use romlab::pde::{Grid, SimParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Relative paths, in configs and on the command line, resolve under this
/// directory when set.
pub const OUTPUT_ROOT_ENV: &str = "ROMLAB_OUTPUT_ROOT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

pub fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        output_root().join(path)
    }
}

/// Substitutes `{seed}` in a path template.
pub fn with_seed(template: &Path, seed: u64) -> PathBuf {
    PathBuf::from(template.to_string_lossy().replace("{seed}", &seed.to_string()))
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        bail!("config schema_version {version} is not supported (expected {SCHEMA_VERSION})");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub count: usize,
    pub test_count: usize,
    pub steps: usize,
    pub grid: Grid,
    pub sim: SimParams,
    pub out: PathBuf,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        GenDataConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            count: 100,
            test_count: 100,
            steps: 50,
            grid: Grid::default(),
            sim: SimParams::default(),
            out: "data".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dmdc,
    Larom,
    Deeprom,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dmdc => "dmdc",
            ModelKind::Larom => "larom",
            ModelKind::Deeprom => "deeprom",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaromSettings {
    pub beta1: f64,
    pub beta4: f64,
    pub lr: f64,
    pub lr_decay: f64,
    pub iterations: usize,
    pub grad_tol: f64,
}

impl Default for LaromSettings {
    fn default() -> Self {
        let d = romlab::linear_rom::LaromConfig::default();
        LaromSettings { beta1: d.beta1, beta4: d.beta4, lr: d.lr, lr_decay: d.lr_decay, iterations: d.iterations, grad_tol: d.grad_tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeepromSettings {
    pub channels: usize,
    pub fc_width: usize,
    pub mlp_width: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub beta2: f64,
    pub validation_fraction: f64,
}

impl Default for DeepromSettings {
    fn default() -> Self {
        let a = romlab::deeprom::Architecture::default();
        let t = romlab::deeprom::TrainConfig::default();
        DeepromSettings {
            channels: a.channels,
            fc_width: a.fc_width,
            mlp_width: a.mlp_width,
            epochs: t.epochs,
            batch: t.batch,
            lr: t.lr,
            lr_decay: t.lr_decay,
            beta2: t.beta2,
            validation_fraction: t.validation_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCmdConfig {
    pub schema_version: u32,
    pub model: ModelKind,
    pub seed: u64,
    pub r_x: usize,
    /// DMDc truncation of `Ω`; the noise-floor rule when absent.
    pub r_xu: Option<usize>,
    pub data: PathBuf,
    /// Defaults to `models/{model}_r{r_x}_s{seed}`.
    pub out: Option<PathBuf>,
    pub larom: LaromSettings,
    pub deeprom: DeepromSettings,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            schema_version: SCHEMA_VERSION,
            model: ModelKind::Dmdc,
            seed: 0,
            r_x: 5,
            r_xu: None,
            data: "data/train".into(),
            out: None,
            larom: LaromSettings::default(),
            deeprom: DeepromSettings::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Deeproc,
    Lqr,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Deeproc => "deeproc",
            ControllerKind::Lqr => "lqr",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeeprocSettings {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub alpha: f64,
    pub beta3: f64,
    pub k_scale: f64,
    pub validation_fraction: f64,
}

impl Default for DeeprocSettings {
    fn default() -> Self {
        let c = romlab::control::ControlConfig::default();
        DeeprocSettings {
            epochs: c.epochs,
            batch: c.batch,
            lr: c.lr,
            lr_decay: c.lr_decay,
            alpha: c.alpha,
            beta3: c.beta3,
            k_scale: c.k_scale,
            validation_fraction: c.validation_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqrSettings {
    pub q_weight: f64,
    pub r_weight: f64,
}

impl Default for LqrSettings {
    fn default() -> Self {
        LqrSettings { q_weight: 1.0, r_weight: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCtrlConfig {
    pub schema_version: u32,
    pub method: ControllerKind,
    pub seed: u64,
    /// Only DeepROC reads the training data.
    pub data: PathBuf,
    /// ROM checkpoint; `{seed}` is substituted. Defaults to the r_x = 2
    /// DeepROM (DeepROC) or DMDc (LQR) checkpoint of the same seed.
    pub rom: Option<PathBuf>,
    /// Defaults to `controllers/{method}_s{seed}`.
    pub out: Option<PathBuf>,
    pub deeproc: DeeprocSettings,
    pub lqr: LqrSettings,
}

impl Default for TrainCtrlConfig {
    fn default() -> Self {
        TrainCtrlConfig {
            schema_version: SCHEMA_VERSION,
            method: ControllerKind::Deeproc,
            seed: 0,
            data: "data/train".into(),
            rom: None,
            out: None,
            deeproc: DeeprocSettings::default(),
            lqr: LqrSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredMethod {
    pub label: String,
    pub kind: ModelKind,
    /// `{seed}` is substituted.
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalPredConfig {
    pub schema_version: u32,
    pub test_data: PathBuf,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub methods: Vec<PredMethod>,
    pub out: PathBuf,
}

impl Default for EvalPredConfig {
    fn default() -> Self {
        EvalPredConfig {
            schema_version: SCHEMA_VERSION,
            test_data: "data/test".into(),
            horizon: 50,
            seeds: vec![0, 1, 2],
            methods: vec![
                PredMethod { label: "dmdc".into(), kind: ModelKind::Dmdc, checkpoint: "models/dmdc_r5_s{seed}".into() },
                PredMethod { label: "deeprom".into(), kind: ModelKind::Deeprom, checkpoint: "models/deeprom_r5_s{seed}".into() },
            ],
            out: "eval/pred".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtrlMethod {
    pub label: String,
    pub kind: ControllerKind,
    /// `{seed}` is substituted.
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalCtrlConfig {
    pub schema_version: u32,
    pub horizon: f64,
    pub seeds: Vec<u64>,
    pub uncontrolled: bool,
    pub controllers: Vec<CtrlMethod>,
    pub grid: Grid,
    pub sim: SimParams,
    pub out: PathBuf,
}

impl Default for EvalCtrlConfig {
    fn default() -> Self {
        EvalCtrlConfig {
            schema_version: SCHEMA_VERSION,
            horizon: 5.0,
            seeds: vec![0, 1, 2],
            uncontrolled: true,
            controllers: vec![
                CtrlMethod { label: "deeproc".into(), kind: ControllerKind::Deeproc, checkpoint: "controllers/deeproc_s{seed}".into() },
                CtrlMethod { label: "dmdc_lqr".into(), kind: ControllerKind::Lqr, checkpoint: "controllers/lqr_s{seed}".into() },
            ],
            grid: Grid::default(),
            sim: SimParams::default(),
            out: "eval/ctrl".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    pub schema_version: u32,
    pub a: PathBuf,
    pub b: PathBuf,
    pub out: PathBuf,
}

impl Default for ModesConfig {
    fn default() -> Self {
        ModesConfig {
            schema_version: SCHEMA_VERSION,
            a: "models/dmdc_r3_s0".into(),
            b: "models/larom_r3_s0".into(),
            out: "modes".into(),
        }
    }
}

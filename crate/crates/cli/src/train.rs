use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use romlab::control::{lqr_fit, train_controller, ControlConfig, DeepROC, LqrController};
use romlab::deeprom::{train_deeprom, write_training_log, Architecture, DeepROM, TrainConfig};
use romlab::io::write_json;
use romlab::linalg::{eig, svd, DenseMatrix};
use romlab::linear_rom::{
    assemble_snapshots, default_rxu, dynamic_modes, fit_dmdc, fit_larom, load_linear_rom, save_linear_rom,
    write_modes_csv, LaromConfig, LinearROM,
};
use romlab::pde::{load_dataset, Grid};

use crate::config::{check_schema, resolve, with_seed, ControllerKind, ModelKind, TrainCmdConfig, TrainCtrlConfig};
use crate::{prepare_out, Overrides};

/// Max-norm tolerance on `E Eᵀ − I` for linear checkpoints built from an
/// orthonormal basis.
const ORTHO_TOL: f64 = 1e-10;

pub(crate) fn orthonormality_error(e: &DenseMatrix) -> f64 {
    let eet = e.matmul_t(e);
    (&eet - &DenseMatrix::identity(e.rows())).max_abs()
}

pub(crate) fn mode_grid(d_x: usize) -> Grid {
    Grid { nodes: d_x, ..Grid::default() }
}

fn export_modes(dir: &Path, rom: &LinearROM) -> Result<()> {
    let modes = dynamic_modes(rom)?;
    write_modes_csv(&dir.join("modes.csv"), &mode_grid(rom.d_x()).coords(), &modes)?;
    Ok(())
}

#[derive(Serialize)]
struct DmdcLog {
    r_x: usize,
    r_xu: usize,
    omega_singular_values: Vec<f64>,
    y_singular_values: Vec<f64>,
    orthonormality_error: f64,
}

#[derive(Serialize)]
struct LaromReport {
    iterations: usize,
    loss: f64,
    grad_norm: f64,
    converged: bool,
}

#[derive(Serialize)]
struct DeepromReport {
    best_epoch: usize,
    best_val_loss: f64,
    train_sequences: Vec<usize>,
    val_sequences: Vec<usize>,
}

/// Fits one model on a training set and writes its checkpoint and log.
pub fn cmd_train(mut cfg: TrainCmdConfig, ov: &Overrides) -> Result<PathBuf> {
    check_schema(cfg.schema_version)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    let default_out = PathBuf::from(format!("models/{}_r{}_s{}", cfg.model.name(), cfg.r_x, cfg.seed));
    cfg.out = Some(ov.out.clone().or(cfg.out.take()).unwrap_or(default_out));
    let data_dir = resolve(&cfg.data);
    let ds = load_dataset(&data_dir).with_context(|| format!("loading training data from {}", data_dir.display()))?;
    if cfg.model == ModelKind::Dmdc && cfg.r_xu.is_none() {
        cfg.r_xu = Some(default_rxu(&assemble_snapshots(&ds)?, cfg.r_x)?);
    }
    let dir = prepare_out(cfg.out.as_ref().expect("set above"), &cfg)?;
    log::info!("training {} (r_x = {}, seed {}) into {}", cfg.model.name(), cfg.r_x, cfg.seed, dir.display());
    match cfg.model {
        ModelKind::Dmdc => {
            let snap = assemble_snapshots(&ds)?;
            let r_xu = cfg.r_xu.expect("set above");
            let rom = fit_dmdc(&snap, cfg.r_x, r_xu).context("DMDc fit")?;
            let ortho = orthonormality_error(&rom.e);
            ensure!(ortho <= ORTHO_TOL, "DMDc encoder fails E Eᵀ = I: max deviation {ortho:e}");
            save_linear_rom(&dir, "dmdc", serde_json::json!({ "r_x": cfg.r_x, "r_xu": r_xu }), &rom)?;
            let log = DmdcLog {
                r_x: cfg.r_x,
                r_xu,
                omega_singular_values: svd(&snap.omega)?.s,
                y_singular_values: svd(&snap.y)?.s,
                orthonormality_error: ortho,
            };
            write_json(&dir.join("training_log.json"), &log)?;
            export_modes(&dir, &rom)?;
        }
        ModelKind::Larom => {
            let snap = assemble_snapshots(&ds)?;
            let l = &cfg.larom;
            let lc = LaromConfig {
                r_x: cfg.r_x,
                beta1: l.beta1,
                beta4: l.beta4,
                lr: l.lr,
                lr_decay: l.lr_decay,
                iterations: l.iterations,
                grad_tol: l.grad_tol,
                seed: cfg.seed,
            };
            let fit = fit_larom(&snap, &lc).context("LAROM fit")?;
            if !fit.converged {
                log::warn!("LAROM stopped at the iteration cap with gradient norm {:e}", fit.grad_norm);
            }
            save_linear_rom(&dir, "larom", serde_json::to_value(&lc)?, &fit.rom)?;
            let mut f = std::io::BufWriter::new(fs::File::create(dir.join("training_log.csv"))?);
            writeln!(f, "iteration,loss")?;
            for (i, l) in fit.history.iter().enumerate() {
                writeln!(f, "{i},{l:e}")?;
            }
            f.flush()?;
            let report = LaromReport { iterations: fit.iterations, loss: fit.loss, grad_norm: fit.grad_norm, converged: fit.converged };
            write_json(&dir.join("report.json"), &report)?;
            export_modes(&dir, &fit.rom)?;
        }
        ModelKind::Deeprom => {
            let d = &cfg.deeprom;
            let arch = Architecture {
                nodes: ds.grid.nodes,
                r_x: cfg.r_x,
                d_u: 1,
                channels: d.channels,
                fc_width: d.fc_width,
                mlp_width: d.mlp_width,
                dt: ds.params.dt,
            };
            let tc = TrainConfig {
                epochs: d.epochs,
                batch: d.batch,
                lr: d.lr,
                lr_decay: d.lr_decay,
                beta2: d.beta2,
                validation_fraction: d.validation_fraction,
                seed: cfg.seed,
                freeze_autoencoder: false,
            };
            let (model, report) = train_deeprom(&ds, arch, &tc).context("DeepROM training")?;
            model.save(&dir, cfg.seed)?;
            write_training_log(&dir.join("training_log.csv"), &report.log)?;
            let r = DeepromReport {
                best_epoch: report.best_epoch,
                best_val_loss: report.best_val_loss,
                train_sequences: report.train_sequences,
                val_sequences: report.val_sequences,
            };
            write_json(&dir.join("report.json"), &r)?;
        }
    }
    Ok(dir)
}

/// On-disk form of an LQR gain; the ROM sits next to it in `rom/`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LqrFile {
    pub q_weight: f64,
    pub r_weight: f64,
    pub shape: [usize; 2],
    pub gain: Vec<f64>,
    pub spectral_radius: f64,
}

pub(crate) fn load_lqr(dir: &Path) -> Result<LqrController> {
    let (_, rom) = load_linear_rom(&dir.join("rom")).with_context(|| format!("loading LQR ROM from {}", dir.display()))?;
    let text = fs::read_to_string(dir.join("lqr.json")).with_context(|| format!("reading {}/lqr.json", dir.display()))?;
    let f: LqrFile = serde_json::from_str(&text)?;
    let gain = DenseMatrix::from_vec(f.shape[0], f.shape[1], f.gain)?;
    ensure!(gain.shape() == (rom.d_u(), rom.r_x()), "LQR gain shape {:?} does not fit the ROM", gain.shape());
    let c = LqrController { gain, rom, q_weight: f.q_weight, r_weight: f.r_weight };
    let radius = eig(&c.closed_loop_matrix())?.spectral_radius();
    ensure!(radius < 1.0, "stored LQR gain gives closed-loop spectral radius {radius}");
    Ok(c)
}

pub(crate) fn load_deeproc(dir: &Path) -> Result<(DeepROM, DeepROC)> {
    let (rom, _) = DeepROM::load(&dir.join("rom")).with_context(|| format!("loading DeepROM from {}/rom", dir.display()))?;
    let (ctrl, _) = DeepROC::load(&dir.join("controller")).with_context(|| format!("loading DeepROC from {}/controller", dir.display()))?;
    ensure!(ctrl.arch.r_x == rom.r_x(), "controller latent size {} differs from the ROM's {}", ctrl.arch.r_x, rom.r_x());
    Ok((rom, ctrl))
}

/// Trains DeepROC on a frozen DeepROM, or computes the LQR gain of a DMDc ROM.
/// The output directory holds the controller and a copy of its ROM.
pub fn cmd_train_ctrl(mut cfg: TrainCtrlConfig, ov: &Overrides) -> Result<PathBuf> {
    check_schema(cfg.schema_version)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    let default_rom = match cfg.method {
        ControllerKind::Deeproc => "models/deeprom_r2_s{seed}",
        ControllerKind::Lqr => "models/dmdc_r2_s{seed}",
    };
    let rom_path = with_seed(cfg.rom.as_deref().unwrap_or(Path::new(default_rom)), cfg.seed);
    cfg.rom = Some(rom_path.clone());
    let default_out = PathBuf::from(format!("controllers/{}_s{}", cfg.method.name(), cfg.seed));
    cfg.out = Some(ov.out.clone().or(cfg.out.take()).unwrap_or(default_out));
    let rom_dir = resolve(&rom_path);
    match cfg.method {
        ControllerKind::Deeproc => {
            let (rom, _) = DeepROM::load(&rom_dir).with_context(|| format!("loading DeepROM from {}", rom_dir.display()))?;
            let ds = load_dataset(&resolve(&cfg.data)).with_context(|| format!("loading training data from {}", cfg.data.display()))?;
            let dir = prepare_out(cfg.out.as_ref().expect("set above"), &cfg)?;
            let d = &cfg.deeproc;
            let cc = ControlConfig {
                epochs: d.epochs,
                batch: d.batch,
                lr: d.lr,
                lr_decay: d.lr_decay,
                alpha: d.alpha,
                beta3: d.beta3,
                k_scale: d.k_scale,
                validation_fraction: d.validation_fraction,
                seed: cfg.seed,
            };
            log::info!("training DeepROC (seed {}) into {}", cfg.seed, dir.display());
            let (ctrl, report) = train_controller(&rom, &ds, &cc).context("DeepROC training")?;
            ctrl.save(&dir.join("controller"), cfg.seed)?;
            rom.save(&dir.join("rom"), cfg.seed)?;
            write_training_log(&dir.join("training_log.csv"), &report.log)?;
            let r = DeepromReport {
                best_epoch: report.best_epoch,
                best_val_loss: report.best_val_loss,
                train_sequences: report.train_sequences,
                val_sequences: report.val_sequences,
            };
            write_json(&dir.join("report.json"), &r)?;
            Ok(dir)
        }
        ControllerKind::Lqr => {
            let (manifest, rom) = load_linear_rom(&rom_dir).with_context(|| format!("loading linear ROM from {}", rom_dir.display()))?;
            if manifest.kind != "dmdc" {
                bail!("LQR baseline expects a DMDc checkpoint, found {:?}", manifest.kind);
            }
            let dir = prepare_out(cfg.out.as_ref().expect("set above"), &cfg)?;
            let c = lqr_fit(&rom, cfg.lqr.q_weight, cfg.lqr.r_weight)?;
            let spectral_radius = eig(&c.closed_loop_matrix())?.spectral_radius();
            save_linear_rom(&dir.join("rom"), "dmdc", manifest.hyperparameters, &rom)?;
            let f = LqrFile {
                q_weight: c.q_weight,
                r_weight: c.r_weight,
                shape: [c.gain.rows(), c.gain.cols()],
                gain: c.gain.as_slice().to_vec(),
                spectral_radius,
            };
            write_json(&dir.join("lqr.json"), &f)?;
            log::info!("LQR gain written to {} (closed-loop spectral radius {spectral_radius:.6})", dir.display());
            Ok(dir)
        }
    }
}

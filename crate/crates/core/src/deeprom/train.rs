use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{rows_tensor, Architecture, DeepROM};
use super::DeepRomError;
use crate::autodiff::{AdamState, AutodiffError, Graph, Tensor, Var};
use crate::pde::TrajectoryDataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub beta2: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Keeps encoder and decoder fixed; only the latent field trains.
    pub freeze_autoencoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch: 32,
            lr: 1e-3,
            lr_decay: 0.99,
            beta2: 1.0,
            validation_fraction: 0.1,
            seed: 0,
            freeze_autoencoder: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DeepRomError> {
        let ok = self.epochs > 0
            && self.batch > 0
            && self.lr > 0.0
            && self.lr_decay > 0.0
            && self.beta2 >= 0.0
            && self.validation_fraction > 0.0
            && self.validation_fraction < 1.0;
        if !ok {
            return Err(DeepRomError::Argument(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub train_sequences: Vec<usize>,
    pub val_sequences: Vec<usize>,
}

/// One-step transitions `(x_i, u_i, x_{i+1})`, never spanning two sequences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pairs {
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Pairs {
    pub fn from_dataset(ds: &TrajectoryDataset, sequences: &[usize]) -> Self {
        let mut p = Pairs::default();
        for &s in sequences {
            let seq = &ds.sequences[s];
            for (i, &w) in seq.actuations.iter().enumerate() {
                p.x.push(seq.states[i].clone());
                p.u.push(vec![w]);
                p.y.push(seq.states[i + 1].clone());
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Pairs {
        Pairs {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            u: idx.iter().map(|&i| self.u[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i].clone()).collect(),
        }
    }
}

/// Shuffles sequence indices with the seed and holds out
/// `round(fraction · n)` (at least one) for validation.
pub fn split_sequences(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DeepRomError> {
    let n_val = ((fraction * n as f64).round() as usize).max(1);
    if n_val >= n {
        return Err(DeepRomError::Argument(format!("cannot hold out {n_val} of {n} sequences for validation")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = idx.split_off(n - n_val);
    idx.sort_unstable();
    val.sort_unstable();
    Ok((idx, val))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub pred: f64,
    pub recon: f64,
}

fn build_loss(model: &DeepROM, g: &mut Graph, trainable: bool, batch: &Pairs, beta2: f64) -> Result<(Var, Var, Var, crate::autodiff::Binding), AutodiffError> {
    let b = model.bind(g, trainable);
    let (nodes, d_u) = (model.arch.nodes, model.arch.d_u);
    let n = batch.len() as f64;
    let x = g.constant(rows_tensor(&batch.x, nodes)?);
    let u = g.constant(rows_tensor(&batch.u, d_u)?);
    let y = g.constant(rows_tensor(&batch.y, nodes)?);
    let zx = b.encode(g, x)?;
    let zy = b.encode(g, y)?;
    let zp = b.step(g, zx, u)?;
    let diff = g.sub(zy, zp)?;
    let pred = g.sum_squares(diff)?;
    let pred = g.scale(pred, 1.0 / n)?;
    // successors plus the desired (zero) state
    let yr = b.decode(g, zy)?;
    let ry = g.sub(yr, y)?;
    let ry = g.sum_squares(ry)?;
    let zero = g.constant(Tensor::zeros(&[1, nodes]));
    let z0 = b.encode(g, zero)?;
    let r0 = b.decode(g, z0)?;
    let r0 = g.sum_squares(r0)?;
    let recon = g.add(ry, r0)?;
    let recon = g.scale(recon, 1.0 / (n + 1.0))?;
    let total = g.add_scaled(pred, recon, beta2)?;
    Ok((total, pred, recon, b.binding))
}

/// `L_pred + β2 L_recon` on a batch, with parameter gradients when asked.
pub fn batch_loss(model: &DeepROM, batch: &Pairs, beta2: f64, grads: bool) -> Result<(LossParts, Option<Vec<Tensor>>), DeepRomError> {
    if batch.is_empty() {
        return Err(DeepRomError::Argument("empty batch".into()));
    }
    let mut g = Graph::new();
    let (total, pred, recon, binding) = build_loss(model, &mut g, grads, batch, beta2)?;
    let parts = LossParts { total: g.value(total).item(), pred: g.value(pred).item(), recon: g.value(recon).item() };
    let gr = if grads {
        let gs = g.backward(total)?;
        Some(binding.collect_grads(&g, &gs))
    } else {
        None
    };
    Ok((parts, gr))
}

fn mean_loss(model: &DeepROM, pairs: &Pairs, beta2: f64, chunk: usize) -> Result<f64, DeepRomError> {
    let mut acc = 0.0;
    for start in (0..pairs.len()).step_by(chunk) {
        let idx: Vec<usize> = (start..(start + chunk).min(pairs.len())).collect();
        let (parts, _) = batch_loss(model, &pairs.select(&idx), beta2, false)?;
        acc += parts.total * idx.len() as f64;
    }
    Ok(acc / pairs.len() as f64)
}

/// Mini-batch Adam on `L_pred + β2 L_recon`, keeping the parameters with the
/// lowest validation loss.
pub fn train_deeprom(ds: &TrajectoryDataset, arch: Architecture, cfg: &TrainConfig) -> Result<(DeepROM, TrainReport), DeepRomError> {
    cfg.validate()?;
    if arch.nodes != ds.grid.nodes || arch.d_u != 1 {
        return Err(DeepRomError::Argument(format!(
            "architecture expects {} nodes and d_u = {}, dataset has {} nodes and scalar actuation",
            arch.nodes, arch.d_u, ds.grid.nodes
        )));
    }
    let (train_seq, val_seq) = split_sequences(ds.len(), cfg.validation_fraction, cfg.seed)?;
    let train = Pairs::from_dataset(ds, &train_seq);
    let val = Pairs::from_dataset(ds, &val_seq);
    let model = DeepROM::new(arch, cfg.seed)?;
    train_pairs(model, &train, &val, cfg, train_seq, val_seq)
}

/// The training loop on pre-split transitions, starting from `model`.
pub fn train_pairs(
    mut model: DeepROM,
    train: &Pairs,
    val: &Pairs,
    cfg: &TrainConfig,
    train_sequences: Vec<usize>,
    val_sequences: Vec<usize>,
) -> Result<(DeepROM, TrainReport), DeepRomError> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(DeepRomError::Argument("training and validation sets must be non-empty".into()));
    }
    let frozen = model.autoencoder_mask();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(&model.params, cfg.lr, cfg.lr_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0, model.params.clone());
    for epoch in 1..=cfg.epochs {
        let lr = adam.lr;
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let batch = train.select(chunk);
            let step = batch_loss(&model, &batch, cfg.beta2, true);
            let grads = match step {
                Ok((p, g)) if p.total.is_finite() => g.expect("gradients requested"),
                Ok(_) | Err(DeepRomError::Autodiff(AutodiffError::NonFinite(_))) => {
                    log.push(EpochLog { epoch, train_loss: f64::NAN, val_loss: f64::NAN, lr });
                    return Err(DeepRomError::Diverged { epoch, log });
                }
                Err(e) => return Err(e),
            };
            let mut grads = grads;
            if cfg.freeze_autoencoder {
                for (g, &f) in grads.iter_mut().zip(&frozen) {
                    if f {
                        g.data_mut().iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
            adam.step(&mut model.params, &grads);
        }
        // both losses at the end-of-epoch parameters, not a running batch mean
        let (train_loss, val_loss) = match (mean_loss(&model, train, cfg.beta2, 256), mean_loss(&model, val, cfg.beta2, 256)) {
            (Ok(t), Ok(v)) if t.is_finite() && v.is_finite() => (t, v),
            (Err(e), _) | (_, Err(e)) if !matches!(e, DeepRomError::Autodiff(AutodiffError::NonFinite(_))) => return Err(e),
            (t, v) => {
                let finite = |r: Result<f64, DeepRomError>| r.ok().filter(|x| x.is_finite()).unwrap_or(f64::NAN);
                log.push(EpochLog { epoch, train_loss: finite(t), val_loss: finite(v), lr });
                return Err(DeepRomError::Diverged { epoch, log });
            }
        };
        log::info!("epoch {epoch}: train {train_loss:.6e}, val {val_loss:.6e}, lr {lr:.3e}");
        log.push(EpochLog { epoch, train_loss, val_loss, lr });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params.clone());
        }
        adam.end_epoch();
    }
    model.params = best.2;
    let report = TrainReport { log, best_epoch: best.1, best_val_loss: best.0, train_sequences, val_sequences };
    Ok((model, report))
}

/// CSV with header `epoch,train_loss,val_loss,lr`.
pub fn write_training_log(path: &Path, log: &[EpochLog]) -> Result<(), DeepRomError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "epoch,train_loss,val_loss,lr")?;
    for e in log {
        writeln!(f, "{},{:e},{:e},{:e}", e.epoch, e.train_loss, e.val_loss, e.lr)?;
    }
    Ok(())
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::deeproc::DeepROC;
use super::ControlError;
use crate::autodiff::{AdamState, AutodiffError, Graph, Tensor};
use crate::deeprom::{split_sequences, DeepROM, EpochLog, TrainReport};
use crate::pde::TrajectoryDataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub alpha: f64,
    pub beta3: f64,
    /// `K = k_scale · I`.
    pub k_scale: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            epochs: 100,
            batch: 32,
            lr: 1e-3,
            lr_decay: 0.99,
            alpha: 0.2,
            beta3: 0.2,
            k_scale: 0.5,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.epochs > 0
            && self.batch > 0
            && self.lr > 0.0
            && self.lr_decay > 0.0
            && self.alpha > 0.0
            && self.beta3 >= 0.0
            && self.k_scale > 0.0
            && self.validation_fraction > 0.0
            && self.validation_fraction < 1.0;
        if !ok {
            return Err(ControlError::Argument(format!("invalid controller configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ControlLoss {
    pub total: f64,
    /// Mean `‖F(z, Π(x)) − F_s(x)‖²`.
    pub matching: f64,
    /// Mean `‖Π(x)‖²`.
    pub effort: f64,
    pub grads: Option<Vec<Tensor>>,
    /// True when no gradient reached any ROM parameter.
    pub rom_frozen: bool,
}

/// Shifted latents `E(x) − z*` of every state in the listed sequences.
pub fn latent_states(rom: &DeepROM, ctrl: &DeepROC, ds: &TrajectoryDataset, sequences: &[usize]) -> Result<Vec<Vec<f64>>, ControlError> {
    let states: Vec<Vec<f64>> = sequences.iter().flat_map(|&s| ds.sequences[s].states.iter().cloned()).collect();
    let mut out = Vec::with_capacity(states.len());
    for chunk in states.chunks(256) {
        out.extend(rom.encode_batch(chunk)?.iter().map(|z| ctrl.shift(z)));
    }
    Ok(out)
}

/// `L = mean‖F(x + z*, Π(x)) − F_s(x)‖² + β3 mean‖Π(x)‖²` over shifted latents `x`.
pub fn control_loss(rom: &DeepROM, ctrl: &DeepROC, latents: &[Vec<f64>], beta3: f64, grads: bool) -> Result<ControlLoss, ControlError> {
    let (n, r) = (latents.len(), ctrl.arch.r_x);
    if n == 0 {
        return Err(ControlError::Argument("no latent states".into()));
    }
    if rom.r_x() != r || rom.d_u() != ctrl.arch.d_u {
        return Err(ControlError::Shape(format!("ROM has r_x = {}, d_u = {}; controller expects {r}, {}", rom.r_x(), rom.d_u(), ctrl.arch.d_u)));
    }
    let mut g = Graph::new();
    let rb = rom.bind(&mut g, false);
    let cb = ctrl.bind(&mut g, grads);
    let data: Vec<f64> = latents.iter().flatten().copied().collect();
    let x = g.constant(Tensor::new(&[n, r], data)?);
    let shift: Vec<f64> = (0..n).flat_map(|_| ctrl.z_star.iter().copied()).collect();
    let shift = g.constant(Tensor::new(&[n, r], shift)?);
    let z = g.add(x, shift)?;
    let u = ctrl.pi_forward(&mut g, &cb, x)?;
    let f = rb.latent_rhs(&mut g, z, u)?;
    let fs = ctrl.target_rhs_var(&mut g, &cb, x)?;
    let d = g.sub(f, fs)?;
    let matching = g.sum_squares(d)?;
    let matching = g.scale(matching, 1.0 / n as f64)?;
    let effort = g.sum_squares(u)?;
    let effort = g.scale(effort, 1.0 / n as f64)?;
    let total = g.add_scaled(matching, effort, beta3)?;
    let (grads, rom_frozen) = if grads {
        let gs = g.backward(total)?;
        let frozen = rb.binding.vars().iter().all(|&v| gs.get(v).is_none());
        (Some(cb.collect_grads(&g, &gs)), frozen)
    } else {
        (None, true)
    };
    Ok(ControlLoss {
        total: g.value(total).item(),
        matching: g.value(matching).item(),
        effort: g.value(effort).item(),
        grads,
        rom_frozen,
    })
}

fn mean_loss(rom: &DeepROM, ctrl: &DeepROC, latents: &[Vec<f64>], beta3: f64) -> Result<f64, ControlError> {
    let mut acc = 0.0;
    for chunk in latents.chunks(512) {
        acc += control_loss(rom, ctrl, chunk, beta3, false)?.total * chunk.len() as f64;
    }
    Ok(acc / latents.len() as f64)
}

fn diverged(e: &ControlError) -> bool {
    matches!(e, ControlError::Autodiff(AutodiffError::NonFinite(_)))
}

/// Trains `P` and `Π` jointly against the frozen ROM, keeping the parameters
/// with the lowest validation loss.
pub fn train_controller(rom: &DeepROM, ds: &TrajectoryDataset, cfg: &ControlConfig) -> Result<(DeepROC, TrainReport), ControlError> {
    cfg.validate()?;
    let mut ctrl = DeepROC::for_rom(rom, cfg.alpha, cfg.k_scale, cfg.seed)?;
    let (train_seq, val_seq) = split_sequences(ds.len(), cfg.validation_fraction, cfg.seed)?;
    let train = latent_states(rom, &ctrl, ds, &train_seq)?;
    let val = latent_states(rom, &ctrl, ds, &val_seq)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let mut adam = AdamState::new(&ctrl.params, cfg.lr, cfg.lr_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0, ctrl.params.clone());
    for epoch in 1..=cfg.epochs {
        let lr = adam.lr;
        order.shuffle(&mut rng);
        let mut acc = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| train[i].clone()).collect();
            let loss = match control_loss(rom, &ctrl, &batch, cfg.beta3, true) {
                Ok(l) if l.total.is_finite() => l,
                Ok(_) => return Err(ControlError::Diverged { epoch, log }),
                Err(e) if diverged(&e) => return Err(ControlError::Diverged { epoch, log }),
                Err(e) => return Err(e),
            };
            adam.step(&mut ctrl.params, &loss.grads.expect("gradients requested"));
            acc += loss.total * chunk.len() as f64;
        }
        let train_loss = acc / train.len() as f64;
        let val_loss = match mean_loss(rom, &ctrl, &val, cfg.beta3) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => return Err(ControlError::Diverged { epoch, log }),
            Err(e) if diverged(&e) => return Err(ControlError::Diverged { epoch, log }),
            Err(e) => return Err(e),
        };
        log::info!("controller epoch {epoch}: train {train_loss:.6e}, val {val_loss:.6e}");
        log.push(EpochLog { epoch, train_loss, val_loss, lr });
        if val_loss < best.0 {
            best = (val_loss, epoch, ctrl.params.clone());
        }
        adam.end_epoch();
    }
    ctrl.params = best.2;
    let report = TrainReport { log, best_epoch: best.1, best_val_loss: best.0, train_sequences: train_seq, val_sequences: val_seq };
    Ok((ctrl, report))
}

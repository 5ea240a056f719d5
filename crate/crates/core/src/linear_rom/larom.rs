//! Linear autoencoding ROM trained by full-batch gradient descent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamState, AutodiffError, Graph, Params, Tensor, Var};
use crate::linalg::{default_pinv_tol, svd, DenseMatrix};

use super::dmdc::LinearROM;
use super::oracles::split_g;
use super::snapshots::SnapshotMatrices;
use super::LinearRomError;

const TRACE_LEN: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaromConfig {
    pub r_x: usize,
    /// Reconstruction weight.
    pub beta1: f64,
    /// Semi-orthogonality weight on `‖E Eᵀ − I‖_F²`.
    pub beta4: f64,
    pub lr: f64,
    /// Multiplicative learning-rate decay applied after every iteration.
    pub lr_decay: f64,
    pub iterations: usize,
    /// Stop once `‖∇L‖ ≤ grad_tol · (1 + |L|)`.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for LaromConfig {
    fn default() -> Self {
        LaromConfig { r_x: 3, beta1: 1.0, beta4: 1.0, lr: 1e-3, lr_decay: 1.0, iterations: 20000, grad_tol: 1e-6, seed: 0 }
    }
}

impl LaromConfig {
    fn validate(&self) -> Result<(), LinearRomError> {
        if self.r_x == 0 || !(self.beta1 > 0.0) || !(self.beta4 > 0.0) || !(self.lr > 0.0) {
            return Err(LinearRomError::Argument("LAROM needs r_x > 0 and positive beta1, beta4, lr".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(LinearRomError::Argument(format!("lr_decay {} outside (0, 1]", self.lr_decay)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LaromFit {
    pub rom: LinearROM,
    pub iterations: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub converged: bool,
    /// Loss before each update.
    pub history: Vec<f64>,
}

struct Batch {
    x: Tensor,
    y: Tensor,
    u: Tensor,
    eye: Tensor,
    n: f64,
}

impl Batch {
    /// Every loss term is a sum over snapshot columns of `‖M s_i‖²` with
    /// `s_i = [y_i; x_i; u_i]`, so `S` can be swapped for any `S̃` with
    /// `S̃ S̃ᵀ = S Sᵀ`. `S̃ = Û Σ̂` keeps only the numerically nonzero
    /// directions, which is exact and much narrower than `n`.
    fn new(snap: &SnapshotMatrices, r_x: usize) -> Result<Self, LinearRomError> {
        let s = DenseMatrix::vstack(&[&snap.y, &snap.omega]);
        let f = svd(&s)?;
        let k = f.rank(default_pinv_tol(&s)).max(1);
        let mut us = f.u.cols_range(0..k);
        for i in 0..us.rows() {
            for (j, sv) in f.s[..k].iter().enumerate() {
                us[(i, j)] *= sv;
            }
        }
        let rows = us.transpose();
        let d_x = snap.d_x();
        Ok(Batch {
            y: Tensor::from_matrix(&rows.cols_range(0..d_x)),
            x: Tensor::from_matrix(&rows.cols_range(d_x..2 * d_x)),
            u: Tensor::from_matrix(&rows.cols_range(2 * d_x..rows.cols())),
            eye: Tensor::from_matrix(&DenseMatrix::identity(r_x)),
            n: snap.n() as f64,
        })
    }
}

fn build_loss(g: &mut Graph, b: &Batch, e: Var, gm: Var, cfg: &LaromConfig) -> Result<Var, AutodiffError> {
    let (x, y, u, eye) = (g.constant(b.x.clone()), g.constant(b.y.clone()), g.constant(b.u.clone()), g.constant(b.eye.clone()));
    let z = g.linear(x, e, None)?;
    let zp = g.linear(y, e, None)?;
    let w = g.concat_cols(z, u)?;
    let pred = g.linear(w, gm, None)?;
    let dp = g.sub(zp, pred)?;
    let lp = g.sum_squares(dp)?;
    let et = g.transpose(e)?;
    let rec = g.linear(zp, et, None)?;
    let dr = g.sub(y, rec)?;
    let lr = g.sum_squares(dr)?;
    let eet = g.matmul(e, et)?;
    let dorth = g.sub(eet, eye)?;
    let orth = g.sum_squares(dorth)?;
    let data = g.add_scaled(lp, lr, cfg.beta1)?;
    let data = g.scale(data, 1.0 / b.n)?;
    g.add_scaled(data, orth, cfg.beta4)
}

/// `L_pred + β1 L_recon + β4 ‖E Eᵀ − I‖_F²` with tied decoder `D = Eᵀ`.
pub fn larom_loss(snap: &SnapshotMatrices, e: &DenseMatrix, gm: &DenseMatrix, cfg: &LaromConfig) -> Result<f64, LinearRomError> {
    let batch = Batch::new(snap, e.rows())?;
    let mut g = Graph::new();
    let ev = g.constant(Tensor::from_matrix(e));
    let gv = g.constant(Tensor::from_matrix(gm));
    let loss = build_loss(&mut g, &batch, ev, gv, cfg)?;
    Ok(g.value(loss).item())
}

/// Trains encoder and dynamics from a seeded uniform initialization.
pub fn fit_larom(snap: &SnapshotMatrices, cfg: &LaromConfig) -> Result<LaromFit, LinearRomError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::new();
    params.add_uniform("e", &[cfg.r_x, snap.d_x()], snap.d_x(), &mut rng);
    params.add_uniform("g", &[cfg.r_x, cfg.r_x + snap.d_u], cfg.r_x + snap.d_u, &mut rng);
    train(snap, cfg, params, false)
}

/// Trains only `G` with the encoder held at `e`.
pub fn fit_larom_frozen(snap: &SnapshotMatrices, e: &DenseMatrix, cfg: &LaromConfig) -> Result<LaromFit, LinearRomError> {
    let cfg = LaromConfig { r_x: e.rows(), ..cfg.clone() };
    cfg.validate()?;
    if e.cols() != snap.d_x() {
        return Err(LinearRomError::Shape(format!("encoder {:?} for d_x = {}", e.shape(), snap.d_x())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::new();
    params.add("e", Tensor::from_matrix(e));
    params.add_uniform("g", &[cfg.r_x, cfg.r_x + snap.d_u], cfg.r_x + snap.d_u, &mut rng);
    train(snap, &cfg, params, true)
}

fn train(snap: &SnapshotMatrices, cfg: &LaromConfig, mut params: Params, freeze_encoder: bool) -> Result<LaromFit, LinearRomError> {
    let batch = Batch::new(snap, cfg.r_x)?;
    let mut adam = AdamState::new(&params, cfg.lr, cfg.lr_decay);
    let mut history = Vec::with_capacity(cfg.iterations);
    let diverged = |it: usize, h: &[f64]| LinearRomError::Diverged {
        iteration: it,
        trace: h[h.len().saturating_sub(TRACE_LEN)..].to_vec(),
    };
    let mut it = 0;
    let (loss, grad_norm, converged) = loop {
        let mut g = Graph::new();
        let e = g.leaf(params.tensors()[0].clone(), !freeze_encoder);
        let gm = g.leaf(params.tensors()[1].clone(), true);
        let l = build_loss(&mut g, &batch, e, gm, cfg).map_err(|_| diverged(it, &history))?;
        let loss = g.value(l).item();
        if !loss.is_finite() {
            return Err(diverged(it, &history));
        }
        let grads = g.backward(l).map_err(|_| diverged(it, &history))?;
        let gs = vec![
            grads.get(e).cloned().unwrap_or_else(|| Tensor::zeros(g.value(e).shape())),
            grads.get(gm).cloned().expect("G is trainable"),
        ];
        let grad_norm = gs.iter().flat_map(|t| t.data()).map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm <= cfg.grad_tol * (1.0 + loss.abs()) {
            break (loss, grad_norm, true);
        }
        if it == cfg.iterations {
            break (loss, grad_norm, false);
        }
        history.push(loss);
        adam.step(&mut params, &gs);
        adam.end_epoch();
        it += 1;
    };
    let e = params.tensors()[0].to_matrix()?;
    let (a_r, b_r) = split_g(&params.tensors()[1].to_matrix()?);
    let rom = LinearROM::new(e.clone(), e.transpose(), a_r, b_r)?;
    Ok(LaromFit { rom, iterations: it, loss, grad_norm, converged, history })
}


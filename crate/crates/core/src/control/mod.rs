//! Stability-constrained latent control (DeepROC), the DMDc + LQR baseline
//! and closed-loop evaluation on the full-order solver.

mod closed_loop;
mod deeproc;
mod lqr;
mod train;

pub use closed_loop::{closed_loop_sim, initial_state, write_closed_loop_csv, write_state_history, ClosedLoopResult, Policy, ZeroPolicy};
pub use deeproc::{lyapunov, ControllerArch, DeepROC, DeepRocPolicy, DEEPROC_KIND, GRAD_GUARD};
pub use lqr::{lqr_fit, LqrController};
pub use train::{control_loss, latent_states, train_controller, ControlConfig, ControlLoss};

use crate::autodiff::AutodiffError;
use crate::deeprom::{DeepRomError, EpochLog};
use crate::linalg::LinalgError;
use crate::linear_rom::LinearRomError;
use crate::pde::PdeError;

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("closed-loop ROM has spectral radius {radius} >= 1")]
    Unstable { radius: f64 },
    #[error("policy returned a non-finite actuation at step {step}")]
    NonFiniteActuation { step: usize },
    #[error("controller training diverged in epoch {epoch}")]
    Diverged { epoch: usize, log: Vec<EpochLog> },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    DeepRom(#[from] DeepRomError),
    #[error(transparent)]
    LinearRom(#[from] LinearRomError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

//! Linear reduced-order models: DMDc, the gradient-trained linear
//! autoencoding ROM (LAROM), closed-form fixed-encoder solutions and
//! dynamic-mode extraction.

mod checkpoint;
mod dmdc;
mod larom;
mod modes;
mod oracles;
mod snapshots;

pub use checkpoint::{load_linear_rom, save_linear_rom, LinearRomManifest, LINEAR_ROM_FORMAT};
pub use dmdc::{default_rxu, fit_dmdc, LinearROM, DEFAULT_RXU_RTOL};
pub use larom::{fit_larom, fit_larom_frozen, larom_loss, LaromConfig, LaromFit};
pub use modes::{dynamic_modes, match_modes, write_modes_csv, DynamicModeSet, MatchReport, ModePair};
pub use oracles::{
    closed_form_g, closed_form_g_with, pinv_form_g, normal_equation_residual, pred_loss, truncated_form_g, split_g,
    ClosedFormG, RIDGE_SCALE,
};
pub use snapshots::{assemble_snapshots, assemble_trajectories, SnapshotMatrices};

use crate::autodiff::AutodiffError;
use crate::linalg::LinalgError;

#[derive(Debug, thiserror::Error)]
pub enum LinearRomError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("snapshot matrix has numerical rank {rank} below the requested truncation {requested}; use a smaller r_xu")]
    RankDeficient { rank: usize, requested: usize },
    #[error("Gram matrix is singular and ridge regularization is disabled")]
    SingularGram,
    #[error("training diverged at iteration {iteration}; recent losses {trace:?}")]
    Diverged { iteration: usize, trace: Vec<f64> },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

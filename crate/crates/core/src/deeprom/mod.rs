//! Nonlinear autoencoding ROM: convolutional encoder/decoder around a
//! latent ODE integrated with RK4.

mod model;
mod train;

pub use model::{Architecture, Bound, DeepROM, Rollout, DEEPROM_KIND};
pub use train::{
    batch_loss, split_sequences, train_deeprom, train_pairs, write_training_log, EpochLog, LossParts, Pairs,
    TrainConfig, TrainReport,
};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error)]
pub enum DeepRomError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize, log: Vec<EpochLog> },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

//! Minimal reverse-mode automatic differentiation over dense f64 tensors,
//! with the layers, optimizer and integrator the models need.

mod adam;
pub mod checkpoint;
mod conv;
mod graph;
mod layers;
mod params;
mod rk4;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::{load_params, restore_into, save_params, CheckpointManifest};
pub use graph::{Gradients, Graph, Var};
pub use layers::{Activation, Conv1d, ConvTranspose1d, Linear, Mlp, MlpSpec};
pub use params::{Binding, ParamId, Params};
pub use rk4::rk4_step;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("loss must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

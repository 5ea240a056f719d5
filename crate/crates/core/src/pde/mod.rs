//! Reaction–diffusion testbed: solver, randomized datasets, persistence.

mod dataset;
mod solver;

pub use dataset::{
    chebyshev_field, chebyshev_ic, chebyshev_values, draw_sequence, generate_dataset, load_dataset, save_dataset,
    sequence_rng, simulate_draws, write_trajectory_csv, ArrayEntry, DatasetManifest, Sequence, SequenceDraws,
    TrajectoryDataset, CHEBYSHEV_TERMS, DATASET_FORMAT, TEST_STREAM_OFFSET,
};
pub use solver::{laplacian, rhs, simulate, step, Grid, SimParams, SpatialField, Stepper};

#[derive(Debug, thiserror::Error)]
pub enum PdeError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("tridiagonal system is singular")]
    TridiagonalSingular,
    #[error("simulation produced non-finite values after t = {time}")]
    NonFinite { time: f64 },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("array {array}: {msg}")]
    Shape { array: String, msg: String },
    #[error("array {array}: checksum mismatch")]
    Checksum { array: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

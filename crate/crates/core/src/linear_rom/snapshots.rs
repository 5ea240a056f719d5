use crate::linalg::DenseMatrix;
use crate::pde::TrajectoryDataset;

use super::LinearRomError;

/// Successor states `Y` and state–input stacks `Ω`, one column per transition.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrices {
    /// `d_x x n`.
    pub y: DenseMatrix,
    /// `(d_x + d_u) x n`.
    pub omega: DenseMatrix,
    pub d_u: usize,
}

impl SnapshotMatrices {
    pub fn new(y: DenseMatrix, omega: DenseMatrix, d_u: usize) -> Result<Self, LinearRomError> {
        if y.cols() != omega.cols() || omega.rows() != y.rows() + d_u {
            return Err(LinearRomError::Shape(format!(
                "Y is {:?} but Ω is {:?} with d_u = {d_u}",
                y.shape(),
                omega.shape()
            )));
        }
        Ok(SnapshotMatrices { y, omega, d_u })
    }

    pub fn d_x(&self) -> usize {
        self.y.rows()
    }

    pub fn n(&self) -> usize {
        self.y.cols()
    }

    /// The unshifted states `X` (top block of `Ω`).
    pub fn x(&self) -> DenseMatrix {
        self.omega.rows_range(0..self.d_x())
    }

    /// The inputs `U` (bottom block of `Ω`).
    pub fn u(&self) -> DenseMatrix {
        self.omega.rows_range(self.d_x()..self.omega.rows())
    }
}

/// Builds snapshots from trajectories of `states` (`m + 1` each) and `inputs`
/// (`m` each). Transitions never cross trajectory boundaries.
pub fn assemble_trajectories(trajectories: &[(&[Vec<f64>], &[Vec<f64>])]) -> Result<SnapshotMatrices, LinearRomError> {
    let (first_states, first_inputs) =
        trajectories.first().ok_or_else(|| LinearRomError::Argument("no trajectories".into()))?;
    let d_x = first_states.first().map_or(0, Vec::len);
    let d_u = first_inputs.first().map_or(0, Vec::len);
    if d_x == 0 {
        return Err(LinearRomError::Shape("empty state vectors".into()));
    }
    let mut y_cols = Vec::new();
    let mut w_cols = Vec::new();
    for (k, (states, inputs)) in trajectories.iter().enumerate() {
        if states.len() != inputs.len() + 1 {
            return Err(LinearRomError::Shape(format!(
                "trajectory {k}: {} states for {} inputs",
                states.len(),
                inputs.len()
            )));
        }
        for (i, u) in inputs.iter().enumerate() {
            if states[i].len() != d_x || states[i + 1].len() != d_x || u.len() != d_u {
                return Err(LinearRomError::Shape(format!("trajectory {k}, step {i}: inconsistent dimensions")));
            }
            y_cols.push(states[i + 1].clone());
            let mut w = states[i].clone();
            w.extend_from_slice(u);
            w_cols.push(w);
        }
    }
    if y_cols.is_empty() {
        return Err(LinearRomError::Argument("no transitions".into()));
    }
    SnapshotMatrices::new(DenseMatrix::from_columns(&y_cols), DenseMatrix::from_columns(&w_cols), d_u)
}

/// Scalar-actuation snapshots of a reaction–diffusion dataset.
pub fn assemble_snapshots(ds: &TrajectoryDataset) -> Result<SnapshotMatrices, LinearRomError> {
    let inputs: Vec<Vec<Vec<f64>>> =
        ds.sequences.iter().map(|s| s.actuations.iter().map(|&w| vec![w]).collect()).collect();
    let trajs: Vec<(&[Vec<f64>], &[Vec<f64>])> =
        ds.sequences.iter().zip(&inputs).map(|(s, u)| (s.states.as_slice(), u.as_slice())).collect();
    assemble_trajectories(&trajs)
}

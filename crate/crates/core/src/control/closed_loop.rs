use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::ControlError;
use crate::io::{write_f64s, write_json};
use crate::pde::{Grid, SimParams, SpatialField, Stepper};

/// A state-feedback law on full-order states.
pub trait Policy {
    fn name(&self) -> &str;
    fn act(&self, x: &[f64]) -> Result<Vec<f64>, ControlError>;
}

/// No actuation; the uncontrolled system.
pub struct ZeroPolicy {
    pub d_u: usize,
}

impl Policy for ZeroPolicy {
    fn name(&self) -> &str {
        "uncontrolled"
    }

    fn act(&self, _x: &[f64]) -> Result<Vec<f64>, ControlError> {
        Ok(vec![0.0; self.d_u])
    }
}

/// `2 + cos(2πζ) cos(πζ)`.
pub fn initial_state(grid: &Grid) -> SpatialField {
    use std::f64::consts::PI;
    SpatialField::from_fn(grid, |z| 2.0 + (2.0 * PI * z).cos() * (PI * z).cos())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopResult {
    /// `steps + 1` states.
    pub states: Vec<Vec<f64>>,
    /// `steps` actuations; `actuations[i]` is held over `[t_i, t_{i+1})`.
    pub actuations: Vec<f64>,
    /// `(1/d_x)‖x(t_i)‖²` for every state.
    pub mse_trace: Vec<f64>,
    /// `Σ |u(t_i)| dt`.
    pub actuation_cumulative: f64,
    pub dt: f64,
}

impl ClosedLoopResult {
    /// Running left-Riemann sums of `|u| dt`, one per state.
    pub fn cumulative_trace(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for u in &self.actuations {
            acc += u.abs() * self.dt;
            out.push(acc);
        }
        out
    }

    pub fn final_mse(&self) -> f64 {
        *self.mse_trace.last().expect("at least the initial state")
    }
}

fn mse(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Zero-order-hold feedback on the full-order solver for `round(horizon/dt)` steps.
pub fn closed_loop_sim(
    policy: &dyn Policy,
    x0: &SpatialField,
    horizon: f64,
    params: &SimParams,
    grid: &Grid,
) -> Result<ClosedLoopResult, ControlError> {
    if !(horizon >= 0.0) || x0.values.len() != grid.nodes {
        return Err(ControlError::Argument(format!("horizon {horizon} with a {}-node initial state", x0.values.len())));
    }
    let stepper = Stepper::new(params, grid)?;
    let steps = (horizon / params.dt).round() as usize;
    let mut field = x0.clone();
    let mut states = vec![field.values.clone()];
    let mut mse_trace = vec![mse(&field.values)];
    let mut actuations = Vec::with_capacity(steps);
    let mut cumulative = 0.0;
    for step in 0..steps {
        let u = policy.act(&field.values)?;
        let w = match u.as_slice() {
            [w] if w.is_finite() => *w,
            [_] => return Err(ControlError::NonFiniteActuation { step }),
            other => return Err(ControlError::Shape(format!("policy returned {} actuations, the solver takes one", other.len()))),
        };
        field = stepper.step(&field, w)?;
        cumulative += w.abs() * params.dt;
        actuations.push(w);
        mse_trace.push(mse(&field.values));
        states.push(field.values.clone());
    }
    Ok(ClosedLoopResult { states, actuations, mse_trace, actuation_cumulative: cumulative, dt: params.dt })
}

/// Rows `t, mse, u, cumulative_actuation`; `u` is empty on the final row.
pub fn write_closed_loop_csv(path: &Path, r: &ClosedLoopResult) -> Result<(), ControlError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "t,mse,u,cumulative_actuation")?;
    for (i, (m, c)) in r.mse_trace.iter().zip(r.cumulative_trace()).enumerate() {
        let u = r.actuations.get(i).map_or(String::new(), |u| format!("{u:e}"));
        writeln!(f, "{},{m:e},{u},{c:e}", i as f64 * r.dt)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct HistoryManifest {
    dtype: &'static str,
    shape: [usize; 2],
    dt: f64,
    sha256: String,
}

/// Full state history as `[steps + 1, nodes]` little-endian f64 plus a JSON
/// sidecar, named `<stem>.bin` / `<stem>.json`.
pub fn write_state_history(dir: &Path, stem: &str, r: &ClosedLoopResult) -> Result<(), ControlError> {
    fs::create_dir_all(dir)?;
    let flat: Vec<f64> = r.states.iter().flatten().copied().collect();
    let sha256 = write_f64s(&dir.join(format!("{stem}.bin")), &flat)?;
    let nodes = r.states.first().map_or(0, Vec::len);
    let m = HistoryManifest { dtype: "float64-little-endian", shape: [r.states.len(), nodes], dt: r.dt, sha256 };
    write_json(&dir.join(format!("{stem}.json")), &m)?;
    Ok(())
}

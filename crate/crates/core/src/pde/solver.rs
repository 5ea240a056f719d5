//! Newell–Whitehead–Segel equation `q_t = σ q_ζζ + q(1 − q²) + 1_W w` with
//! zero-flux ends, discretized by finite differences on a uniform grid.

use serde::{Deserialize, Serialize};

use super::PdeError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub left: f64,
    pub right: f64,
    pub nodes: usize,
    /// Open interval; actuation reaches nodes strictly inside it.
    pub actuation_window: (f64, f64),
}

impl Default for Grid {
    fn default() -> Self {
        Grid { left: -1.0, right: 1.0, nodes: 256, actuation_window: (-0.2, 0.2) }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<(), PdeError> {
        let (wl, wr) = self.actuation_window;
        if self.nodes < 3 {
            return Err(PdeError::Argument(format!("grid needs at least 3 nodes, got {}", self.nodes)));
        }
        if !(self.left < self.right && self.left < wl && wl < wr && wr < self.right) {
            return Err(PdeError::Argument(format!("actuation window {:?} must lie strictly inside the domain", self.actuation_window)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.right - self.left) / (self.nodes - 1) as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.nodes).map(|j| if j == self.nodes - 1 { self.right } else { self.left + j as f64 * h }).collect()
    }

    pub fn actuation_mask(&self) -> Vec<bool> {
        let (wl, wr) = self.actuation_window;
        self.coords().into_iter().map(|z| z > wl && z < wr).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub sigma: f64,
    pub dt: f64,
    pub substeps: usize,
    /// Switches off `q(1 − q²)`; leaves pure diffusion plus actuation.
    #[serde(default = "default_true")]
    pub reaction: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { sigma: 0.2, dt: 0.01, substeps: 50, reaction: true }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), PdeError> {
        if !(self.dt > 0.0) || self.substeps == 0 || !(self.sigma >= 0.0) {
            return Err(PdeError::Argument(format!("invalid simulation parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl SpatialField {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        SpatialField { values, time }
    }

    pub fn constant(grid: &Grid, v: f64) -> Self {
        SpatialField { values: vec![v; grid.nodes], time: 0.0 }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        SpatialField { values: grid.coords().into_iter().map(f).collect(), time: 0.0 }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }
}

/// Second-order Laplacian with ghost-node Neumann closure.
pub fn laplacian(q: &[f64], h: f64) -> Vec<f64> {
    let n = q.len();
    let inv = 1.0 / (h * h);
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (q[1] - q[0]) * inv;
    out[n - 1] = 2.0 * (q[n - 2] - q[n - 1]) * inv;
    for j in 1..n - 1 {
        out[j] = (q[j - 1] - 2.0 * q[j] + q[j + 1]) * inv;
    }
    out
}

fn reaction(q: f64) -> f64 {
    q * (1.0 - q * q)
}

/// Continuous right-hand side at `field` under actuation `w`.
pub fn rhs(field: &SpatialField, w: f64, params: &SimParams, grid: &Grid) -> Vec<f64> {
    let mask = grid.actuation_mask();
    let lap = laplacian(&field.values, grid.spacing());
    field
        .values
        .iter()
        .zip(lap)
        .zip(mask)
        .map(|((&q, l), m)| {
            let mut v = params.sigma * l;
            if params.reaction {
                v += reaction(q);
            }
            if m {
                v += w;
            }
            v
        })
        .collect()
}

/// Precomputed Crank–Nicolson operator for one inner step.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: SimParams,
    mask: Vec<bool>,
    h_inner: f64,
    /// `r = σ h / (2 Δζ²)`
    r: f64,
    // Thomas factors of the implicit tridiagonal matrix
    c_prime: Vec<f64>,
    denom: Vec<f64>,
    lower: Vec<f64>,
}

impl Stepper {
    pub fn new(params: &SimParams, grid: &Grid) -> Result<Self, PdeError> {
        params.validate()?;
        grid.validate()?;
        let n = grid.nodes;
        let h_inner = params.dt / params.substeps as f64;
        let dz = grid.spacing();
        let r = params.sigma * h_inner / (2.0 * dz * dz);
        // rows: lower[j] q_{j-1} + diag q_j + upper[j] q_{j+1}
        let diag = vec![1.0 + 2.0 * r; n];
        let mut lower = vec![-r; n];
        let mut upper = vec![-r; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        upper[0] = -2.0 * r;
        lower[n - 1] = -2.0 * r;
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for j in 0..n {
            let d = if j == 0 { diag[0] } else { diag[j] - lower[j] * c_prime[j - 1] };
            if d.abs() < 1e-300 {
                return Err(PdeError::TridiagonalSingular);
            }
            denom[j] = d;
            c_prime[j] = upper[j] / d;
        }
        Ok(Stepper { params: params.clone(), mask: grid.actuation_mask(), h_inner, r, c_prime, denom, lower })
    }

    /// Pointwise `q' = q(1 − q²) + 1_W w` over `tau` by classical RK4.
    fn react(&self, q: &mut [f64], w: f64, tau: f64) {
        let reacts = self.params.reaction;
        for (v, &m) in q.iter_mut().zip(&self.mask) {
            let forcing = if m { w } else { 0.0 };
            if !reacts {
                *v += tau * forcing;
                continue;
            }
            let f = |x: f64| reaction(x) + forcing;
            let k1 = f(*v);
            let k2 = f(*v + 0.5 * tau * k1);
            let k3 = f(*v + 0.5 * tau * k2);
            let k4 = f(*v + tau * k3);
            *v += tau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }

    /// Crank–Nicolson diffusion over one inner step (Thomas algorithm).
    fn diffuse(&self, q: &mut [f64], buf: &mut [f64]) {
        let n = q.len();
        let r = self.r;
        for j in 0..n {
            let (left, right) = match j {
                0 => (q[1], q[1]),
                _ if j == n - 1 => (q[n - 2], q[n - 2]),
                _ => (q[j - 1], q[j + 1]),
            };
            buf[j] = q[j] + r * (left - 2.0 * q[j] + right);
        }
        let mut prev = 0.0;
        for j in 0..n {
            let d = (buf[j] - self.lower[j] * prev) / self.denom[j];
            buf[j] = d;
            prev = d;
        }
        q[n - 1] = buf[n - 1];
        for j in (0..n - 1).rev() {
            q[j] = buf[j] - self.c_prime[j] * q[j + 1];
        }
    }

    /// Strang splitting: half reaction (with actuation), full diffusion,
    /// half reaction.
    fn inner(&self, q: &mut [f64], w: f64, buf: &mut [f64]) {
        let h = self.h_inner;
        self.react(q, w, 0.5 * h);
        self.diffuse(q, buf);
        self.react(q, w, 0.5 * h);
    }

    /// Advances one outer step `dt` holding `w` constant.
    pub fn step(&self, field: &SpatialField, w: f64) -> Result<SpatialField, PdeError> {
        if field.values.len() != self.mask.len() {
            return Err(PdeError::Argument(format!("field has {} values, grid has {}", field.values.len(), self.mask.len())));
        }
        let mut q = field.values.clone();
        let mut buf = vec![0.0; q.len()];
        for _ in 0..self.params.substeps {
            self.inner(&mut q, w, &mut buf);
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::NonFinite { time: field.time });
        }
        Ok(SpatialField { values: q, time: field.time + self.params.dt })
    }
}

pub fn step(field: &SpatialField, w: f64, params: &SimParams, grid: &Grid) -> Result<SpatialField, PdeError> {
    Stepper::new(params, grid)?.step(field, w)
}

/// All states from `initial` through one step per actuation.
pub fn simulate(initial: &SpatialField, actuations: &[f64], params: &SimParams, grid: &Grid) -> Result<Vec<SpatialField>, PdeError> {
    let stepper = Stepper::new(params, grid)?;
    let mut out = Vec::with_capacity(actuations.len() + 1);
    out.push(initial.clone());
    for &w in actuations {
        let next = stepper.step(out.last().unwrap(), w)?;
        out.push(next);
    }
    Ok(out)
}

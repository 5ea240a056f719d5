#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use romlab::linalg::{thin_qr, DenseMatrix};
use romlab::linear_rom::{assemble_trajectories, SnapshotMatrices};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `rows x cols` with orthonormal columns.
pub fn orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    thin_qr(&random_matrix(rng, rows, cols)).0
}

pub fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm()
}

/// Unstructured snapshot pairs.
pub fn random_snapshots(seed: u64, d_x: usize, d_u: usize, n: usize) -> SnapshotMatrices {
    let mut r = rng(seed);
    let y = random_matrix(&mut r, d_x, n);
    let omega = random_matrix(&mut r, d_x + d_u, n);
    SnapshotMatrices::new(y, omega, d_u).unwrap()
}

pub struct Trajectories {
    pub states: Vec<Vec<Vec<f64>>>,
    pub inputs: Vec<Vec<Vec<f64>>>,
}

impl Trajectories {
    pub fn snapshots(&self) -> SnapshotMatrices {
        let refs: Vec<(&[Vec<f64>], &[Vec<f64>])> =
            self.states.iter().zip(&self.inputs).map(|(s, u)| (s.as_slice(), u.as_slice())).collect();
        assemble_trajectories(&refs).unwrap()
    }
}

/// Trajectories of `x⁺ = A x + B u` started from `x0s`.
pub fn simulate_linear(a: &DenseMatrix, b: &DenseMatrix, x0s: &[Vec<f64>], steps: usize, rng: &mut impl Rng) -> Trajectories {
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    for x0 in x0s {
        let mut xs = vec![x0.clone()];
        let mut us = Vec::new();
        for _ in 0..steps {
            let u = random_vec(rng, b.cols());
            let mut next = a.matvec(xs.last().unwrap());
            for (n, v) in next.iter_mut().zip(b.matvec(&u)) {
                *n += v;
            }
            xs.push(next);
            us.push(u);
        }
        states.push(xs);
        inputs.push(us);
    }
    Trajectories { states, inputs }
}

/// A stable `r x r` matrix with well-separated real eigenvalues `0.9, 0.75, ...`
/// in a random basis.
pub fn stable_latent(rng: &mut impl Rng, r: usize) -> DenseMatrix {
    let p = &random_matrix(rng, r, r) + &DenseMatrix::identity(r).scale(2.0);
    let d = DenseMatrix::from_diag(&(0..r).map(|i| 0.9 - 0.15 * i as f64).collect::<Vec<_>>());
    p.matmul(&d).matmul(&p.inverse().unwrap())
}

/// Latent linear dynamics in an `r`-dimensional subspace of `R^{d_x}`, plus
/// off-subspace components with graded scales `η · 0.3^j`.
pub fn near_low_rank(seed: u64, d_x: usize, d_u: usize, r: usize, eta: f64, n_traj: usize, steps: usize) -> SnapshotMatrices {
    let mut rng = rng(seed);
    let v = orthonormal(&mut rng, d_x, r);
    let tail = orthonormal(&mut rng, d_x, d_x);
    let m = stable_latent(&mut rng, r);
    let c = random_matrix(&mut rng, r, d_u);
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    for _ in 0..n_traj {
        let mut z = random_vec(&mut rng, r);
        let mut xs = Vec::new();
        let mut us = Vec::new();
        for k in 0..=steps {
            let mut x = v.matvec(&z);
            for j in 0..d_x {
                let coef = eta * 0.3f64.powi(j as i32) * rng.random_range(-1.0..1.0);
                x.iter_mut().zip(tail.col(j)).for_each(|(xi, t)| *xi += coef * t);
            }
            xs.push(x);
            if k < steps {
                let u = random_vec(&mut rng, d_u);
                let mut zn = m.matvec(&z);
                zn.iter_mut().zip(c.matvec(&u)).for_each(|(a, b)| *a += b);
                z = zn;
                us.push(u);
            }
        }
        states.push(xs);
        inputs.push(us);
    }
    Trajectories { states, inputs }.snapshots()
}

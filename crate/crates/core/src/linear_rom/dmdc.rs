use crate::linalg::{default_pinv_tol, svd, truncated_svd, DenseMatrix};

use super::snapshots::SnapshotMatrices;
use super::LinearRomError;

/// `z = E x`, `z⁺ = A_R z + B_R u`, `x̂ = D z`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearROM {
    /// `r_x x d_x`.
    pub e: DenseMatrix,
    /// `d_x x r_x`.
    pub d: DenseMatrix,
    pub a_r: DenseMatrix,
    /// `r_x x d_u`.
    pub b_r: DenseMatrix,
}

impl LinearROM {
    pub fn new(e: DenseMatrix, d: DenseMatrix, a_r: DenseMatrix, b_r: DenseMatrix) -> Result<Self, LinearRomError> {
        let r = e.rows();
        if d.shape() != (e.cols(), r) || a_r.shape() != (r, r) || b_r.rows() != r {
            return Err(LinearRomError::Shape(format!(
                "E {:?}, D {:?}, A_R {:?}, B_R {:?}",
                e.shape(),
                d.shape(),
                a_r.shape(),
                b_r.shape()
            )));
        }
        Ok(LinearROM { e, d, a_r, b_r })
    }

    pub fn r_x(&self) -> usize {
        self.e.rows()
    }

    pub fn d_x(&self) -> usize {
        self.e.cols()
    }

    pub fn d_u(&self) -> usize {
        self.b_r.cols()
    }

    /// `G = [A_R B_R]`.
    pub fn g(&self) -> DenseMatrix {
        DenseMatrix::hstack(&[&self.a_r, &self.b_r])
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        self.e.matvec(x)
    }

    pub fn decode(&self, z: &[f64]) -> Vec<f64> {
        self.d.matvec(z)
    }

    pub fn latent_step(&self, z: &[f64], u: &[f64]) -> Vec<f64> {
        let mut next = self.a_r.matvec(z);
        for (n, b) in next.iter_mut().zip(self.b_r.matvec(u)) {
            *n += b;
        }
        next
    }

    /// One-step prediction `D (A_R E x + B_R u)`.
    pub fn predict(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, LinearRomError> {
        self.check_dims(x.len(), u.len())?;
        Ok(self.decode(&self.latent_step(&self.encode(x), u)))
    }

    /// Recursive prediction in latent space; returns `inputs.len() + 1` states
    /// starting with the reconstruction of `x0`.
    pub fn rollout(&self, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LinearRomError> {
        self.check_dims(x0.len(), inputs.first().map_or(self.d_u(), Vec::len))?;
        let mut z = self.encode(x0);
        let mut out = vec![self.decode(&z)];
        for u in inputs {
            if u.len() != self.d_u() {
                return Err(LinearRomError::Shape(format!("input of length {} for d_u = {}", u.len(), self.d_u())));
            }
            z = self.latent_step(&z, u);
            out.push(self.decode(&z));
        }
        Ok(out)
    }

    fn check_dims(&self, dx: usize, du: usize) -> Result<(), LinearRomError> {
        if dx != self.d_x() || du != self.d_u() {
            return Err(LinearRomError::Shape(format!(
                "state/input lengths ({dx}, {du}) for a model with d_x = {}, d_u = {}",
                self.d_x(),
                self.d_u()
            )));
        }
        Ok(())
    }
}

/// Singular values of `Ω` below this fraction of the largest are left out of
/// `Σ̂⁻¹` by [`default_rxu`].
pub const DEFAULT_RXU_RTOL: f64 = 1e-6;

/// Number of singular values of `Ω` above `DEFAULT_RXU_RTOL · σ_1`, clamped
/// into the admissible window `(r_x, min(d_x + d_u, n)]`.
pub fn default_rxu(snap: &SnapshotMatrices, r_x: usize) -> Result<usize, LinearRomError> {
    let f = svd(&snap.omega)?;
    let cap = snap.omega.rows().min(snap.n());
    Ok(f.rank(DEFAULT_RXU_RTOL).clamp(r_x + 1, cap.max(r_x + 1)))
}

/// DMDc with truncation ranks `r_x` (for `Y`) and `r_xu` (for `Ω`).
pub fn fit_dmdc(snap: &SnapshotMatrices, r_x: usize, r_xu: usize) -> Result<LinearROM, LinearRomError> {
    let (d_x, d_u, n) = (snap.d_x(), snap.d_u, snap.n());
    let cap = (d_x + d_u).min(n);
    if r_x == 0 || r_x >= r_xu || r_xu > cap {
        return Err(LinearRomError::Argument(format!(
            "need 0 < r_x < r_xu <= min(d_x + d_u, n) = {cap}, got r_x = {r_x}, r_xu = {r_xu}"
        )));
    }
    if snap.u().max_abs() == 0.0 {
        log::warn!("all inputs are zero: B_R is not identifiable and will come out near zero");
    }
    let uy = truncated_svd(&snap.y, r_x)?.u;
    let om = svd(&snap.omega)?;
    let rank = om.rank(default_pinv_tol(&snap.omega));
    if rank < r_xu {
        return Err(LinearRomError::RankDeficient { rank, requested: r_xu });
    }
    let om = om.truncated(r_xu);
    // Û_Yᵀ Y V̂ Σ̂⁻¹
    let mut core = uy.t_matmul(&snap.y).matmul(&om.v());
    for i in 0..core.rows() {
        for (j, s) in om.s.iter().enumerate() {
            core[(i, j)] /= s;
        }
    }
    let u1 = om.u.rows_range(0..d_x);
    let u2 = om.u.rows_range(d_x..d_x + d_u);
    let a_r = core.matmul_t(&u1).matmul(&uy);
    let b_r = core.matmul_t(&u2);
    LinearROM::new(uy.transpose(), uy, a_r, b_r)
}

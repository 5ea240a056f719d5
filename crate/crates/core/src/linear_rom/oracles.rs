//! Fixed-encoder solutions of the prediction objective.

use crate::linalg::{pinv_default, svd, truncated_svd, DenseMatrix};

use super::snapshots::SnapshotMatrices;
use super::LinearRomError;

/// Ridge strength relative to `trace(Gram) / dim`.
pub const RIDGE_SCALE: f64 = 1e-8;
/// Gram matrices with `σ_min ≤ SINGULAR_RCOND · σ_max` take the ridge path.
const SINGULAR_RCOND: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct ClosedFormG {
    /// `r_x x (r_x + d_u)`.
    pub g: DenseMatrix,
    /// Ridge added to the Gram diagonal, if any.
    pub ridge: Option<f64>,
    /// Normal-equation residual relative to the right-hand side.
    pub residual: f64,
}

/// `E_xu = blockdiag(E, I_du)`.
fn e_xu(e: &DenseMatrix, d_u: usize) -> DenseMatrix {
    DenseMatrix::block_diag(e, &DenseMatrix::identity(d_u))
}

fn check_encoder(snap: &SnapshotMatrices, e: &DenseMatrix) -> Result<(), LinearRomError> {
    if e.cols() != snap.d_x() || e.rows() == 0 {
        return Err(LinearRomError::Shape(format!("encoder {:?} for d_x = {}", e.shape(), snap.d_x())));
    }
    Ok(())
}

/// `‖G Gram − rhs‖_F / ‖rhs‖_F` for the normal equations
/// `G E_xu Ω Ωᵀ E_xuᵀ = E Y Ωᵀ E_xuᵀ`.
pub fn normal_equation_residual(snap: &SnapshotMatrices, e: &DenseMatrix, g: &DenseMatrix) -> Result<f64, LinearRomError> {
    check_encoder(snap, e)?;
    let w = e_xu(e, snap.d_u).matmul(&snap.omega);
    let gram = w.matmul_t(&w);
    let rhs = e.matmul(&snap.y).matmul_t(&w);
    if g.shape() != rhs.shape() {
        return Err(LinearRomError::Shape(format!("G {:?}, expected {:?}", g.shape(), rhs.shape())));
    }
    let res = (&g.matmul(&gram) - &rhs).frobenius_norm();
    let scale = rhs.frobenius_norm();
    Ok(if scale > 0.0 { res / scale } else { res })
}

/// `G = E Y Ωᵀ E_xuᵀ (E_xu Ω Ωᵀ E_xuᵀ)⁻¹`, falling back to a small ridge
/// when the Gram matrix is numerically singular.
pub fn closed_form_g(snap: &SnapshotMatrices, e: &DenseMatrix) -> Result<ClosedFormG, LinearRomError> {
    closed_form_g_with(snap, e, true)
}

pub fn closed_form_g_with(snap: &SnapshotMatrices, e: &DenseMatrix, allow_ridge: bool) -> Result<ClosedFormG, LinearRomError> {
    check_encoder(snap, e)?;
    let w = e_xu(e, snap.d_u).matmul(&snap.omega);
    let mut gram = w.matmul_t(&w);
    let rhs = e.matmul(&snap.y).matmul_t(&w);
    let s = svd(&gram)?.s;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    let mut ridge = None;
    if smin <= SINGULAR_RCOND * smax {
        if !allow_ridge || smax == 0.0 {
            return Err(LinearRomError::SingularGram);
        }
        let lambda = RIDGE_SCALE * gram.trace() / gram.rows() as f64;
        for i in 0..gram.rows() {
            gram[(i, i)] += lambda;
        }
        ridge = Some(lambda);
    }
    // Gram is symmetric: G Gram = rhs  <=>  Gram Gᵀ = rhsᵀ.
    let g = gram.solve(&rhs.transpose())?.transpose();
    let residual = normal_equation_residual(snap, e, &g)?;
    Ok(ClosedFormG { g, ridge, residual })
}

/// Fixed encoder `Û_Yᵀ`, via the pseudoinverse form
/// `G = Û_Yᵀ Y V_Ω (E_xu U_Ω Σ_Ω)⁺` of the SVD of `Ω`.
pub fn pinv_form_g(snap: &SnapshotMatrices, r_x: usize) -> Result<DenseMatrix, LinearRomError> {
    let k = snap.omega.rows().min(snap.n());
    truncated_form_g(snap, r_x, k)
}

/// Truncated-SVD counterpart of [`pinv_form_g`]:
/// `Ĝ = Û_Yᵀ Y V̂_Ω (E_xu Û_Ω Σ̂_Ω)⁺` with `r_xu` retained triplets. Keeping
/// all `min(d_x + d_u, n)` triplets reproduces the full-SVD form exactly:
/// the remaining columns of `Σ_Ω` are zero and give zero pseudoinverse rows.
pub fn truncated_form_g(snap: &SnapshotMatrices, r_x: usize, r_xu: usize) -> Result<DenseMatrix, LinearRomError> {
    let e = truncated_svd(&snap.y, r_x)?.u.transpose();
    let f = truncated_svd(&snap.omega, r_xu)?;
    let mut us = f.u.clone();
    for i in 0..us.rows() {
        for (j, s) in f.s.iter().enumerate() {
            us[(i, j)] *= s;
        }
    }
    let m = e_xu(&e, snap.d_u).matmul(&us);
    Ok(e.matmul(&snap.y).matmul(&f.v()).matmul(&pinv_default(&m)?))
}

/// Splits `G = [A_R B_R]` after the first `r_x` columns.
pub fn split_g(g: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let r = g.rows();
    (g.cols_range(0..r), g.cols_range(r..g.cols()))
}

/// `(1/n) Σ ‖E x(t_{i+1}) − G E_xu ω(t_i)‖²`.
pub fn pred_loss(snap: &SnapshotMatrices, e: &DenseMatrix, g: &DenseMatrix) -> Result<f64, LinearRomError> {
    check_encoder(snap, e)?;
    let w = e_xu(e, snap.d_u).matmul(&snap.omega);
    let r = &e.matmul(&snap.y) - &g.matmul(&w);
    Ok(r.frobenius_norm().powi(2) / snap.n() as f64)
}

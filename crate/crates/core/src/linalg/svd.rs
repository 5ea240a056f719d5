//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! Tall inputs are first reduced with a Householder QR so the Jacobi sweeps
//! run on a square triangular factor; wide inputs are handled through their
//! transpose. Singular values are returned in non-increasing order.

use super::matrix::{thin_qr, DenseMatrix};
use super::LinalgError;

const MAX_SWEEPS: usize = 100;

/// Thin SVD `m = u * diag(s) * vt` with `k = min(rows, cols)` triplets.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `rows x k`, left singular vectors as columns.
    pub u: DenseMatrix,
    /// Singular values, non-increasing.
    pub s: Vec<f64>,
    /// `k x cols`, right singular vectors as rows.
    pub vt: DenseMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.s.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.vt)
    }

    /// Keeps the leading `r` triplets.
    pub fn truncated(&self, r: usize) -> SvdResult {
        SvdResult { u: self.u.cols_range(0..r), s: self.s[..r].to_vec(), vt: self.vt.rows_range(0..r) }
    }

    /// Right singular vectors as columns (`cols x k`).
    pub fn v(&self) -> DenseMatrix {
        self.vt.transpose()
    }

    /// Number of singular values above `tol * s_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&s| s > tol * smax).count()
    }
}

/// Full SVD with square orthogonal `u` (`rows x rows`) and `v` (`cols x cols`).
#[derive(Clone, Debug)]
pub struct FullSvd {
    pub u: DenseMatrix,
    /// `min(rows, cols)` singular values; the rectangular Σ is implied.
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl FullSvd {
    /// The rectangular `rows x cols` Σ.
    pub fn sigma(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.u.rows(), self.v.rows());
        for (i, &s) in self.s.iter().enumerate() {
            m[(i, i)] = s;
        }
        m
    }
}

pub fn svd(m: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SvdResult {
            u: DenseMatrix::zeros(rows, 0),
            s: Vec::new(),
            vt: DenseMatrix::zeros(0, cols),
        });
    }
    if rows >= cols {
        svd_tall(m)
    } else {
        let t = svd_tall(&m.transpose())?;
        Ok(SvdResult { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() })
    }
}

/// Leading `r` singular triplets.
pub fn truncated_svd(m: &DenseMatrix, r: usize) -> Result<SvdResult, LinalgError> {
    let k = m.rows().min(m.cols());
    if r == 0 || r > k {
        return Err(LinalgError::Argument(format!("truncation rank {r} outside 1..={k}")));
    }
    Ok(svd(m)?.truncated(r))
}

/// SVD with both singular-vector bases completed to square orthogonal matrices.
pub fn svd_full(m: &DenseMatrix) -> Result<FullSvd, LinalgError> {
    let thin = svd(m)?;
    let u = complete_basis(&thin.u);
    let v = complete_basis(&thin.v());
    Ok(FullSvd { u, s: thin.s, v })
}

fn svd_tall(a: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    let (m, n) = a.shape();
    if m >= 2 * n {
        let (q, r) = thin_qr(a);
        let inner = jacobi_square_or_tall(&r)?;
        return Ok(SvdResult { u: q.matmul(&inner.u), s: inner.s, vt: inner.vt });
    }
    jacobi_square_or_tall(a)
}

fn jacobi_square_or_tall(a: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let eps = f64::EPSILON;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { iterations: sweeps });
    }
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));
    let smax = norms[order[0]];
    let mut u = DenseMatrix::zeros(m, n);
    let mut vt = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let sj = norms[j];
        s.push(sj);
        if sj == 0.0 || sj <= smax * 1e-200 {
            missing.push(k);
        } else {
            let col: Vec<f64> = cols[j].iter().map(|x| x / sj).collect();
            u.set_col(k, &col);
        }
        vt.row_mut(k).copy_from_slice(&v[j]);
    }
    if !missing.is_empty() {
        fill_missing_columns(&mut u, &missing);
    }
    Ok(SvdResult { u, s, vt })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Replaces the listed columns of `u` with unit vectors orthogonal to all
/// other columns (modified Gram–Schmidt over canonical candidates).
fn fill_missing_columns(u: &mut DenseMatrix, missing: &[usize]) {
    let m = u.rows();
    let mut basis: Vec<Vec<f64>> =
        (0..u.cols()).filter(|j| !missing.contains(j)).map(|j| u.col(j)).collect();
    for &k in missing {
        let v = next_orthogonal(&basis, m);
        u.set_col(k, &v);
        basis.push(v);
    }
}

fn next_orthogonal(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let d: f64 = b.iter().zip(&e).map(|(x, y)| x * y).sum();
                for (x, y) in e.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let nrm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if best.as_ref().is_none_or(|(bn, _)| nrm > *bn) {
            best = Some((nrm, e));
        }
        if nrm > 0.7 {
            break;
        }
    }
    let (nrm, e) = best.expect("basis already spans the space");
    e.into_iter().map(|x| x / nrm).collect()
}

/// Extends the orthonormal columns of `q` to a square orthogonal matrix.
fn complete_basis(q: &DenseMatrix) -> DenseMatrix {
    let m = q.rows();
    let mut basis: Vec<Vec<f64>> = (0..q.cols()).map(|j| q.col(j)).collect();
    while basis.len() < m {
        let v = next_orthogonal(&basis, m);
        basis.push(v);
    }
    DenseMatrix::from_columns(&basis)
}

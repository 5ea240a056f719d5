use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use super::gemm::{gemm, Strided};
use super::LinalgError;

/// Dense real matrix stored in row-major order: `data[i * cols + j] = m[i, j]`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            let row: Vec<String> = self.row(i).iter().take(12).map(|v| format!("{v:.6e}")).collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::InvalidData { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// # Panics
    /// Panics if the rows have inconsistent lengths.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix { rows: rows.len(), cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let rows = cols.first().map_or(0, |c| c.len());
        Self::from_fn(rows, cols.len(), |i, j| cols[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self.data[i * self.cols + j] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// # Panics
    /// Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            1.0,
            Strided::row_major(&self.data, self.cols),
            Strided::row_major(&other.data, other.cols),
            0.0,
            &mut out.data,
        );
        out
    }

    /// `selfᵀ * other` without forming the transpose.
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "t_matmul dimension mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        gemm(
            self.cols,
            self.rows,
            other.cols,
            1.0,
            Strided::transposed(&self.data, self.cols),
            Strided::row_major(&other.data, other.cols),
            0.0,
            &mut out.data,
        );
        out
    }

    /// `self * otherᵀ` without forming the transpose.
    pub fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_t dimension mismatch");
        let mut out = Self::zeros(self.rows, other.rows);
        gemm(
            self.rows,
            self.cols,
            other.rows,
            1.0,
            Strided::row_major(&self.data, self.cols),
            Strided::transposed(&other.data, other.cols),
            0.0,
            &mut out.data,
        );
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scale(&self, c: f64) -> Self {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Columns `range` as a new matrix.
    pub fn cols_range(&self, range: std::ops::Range<usize>) -> Self {
        assert!(range.end <= self.cols);
        Self::from_fn(self.rows, range.len(), |i, j| self[(i, range.start + j)])
    }

    /// Rows `range` as a new matrix.
    pub fn rows_range(&self, range: std::ops::Range<usize>) -> Self {
        assert!(range.end <= self.rows);
        DenseMatrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    pub fn hstack(blocks: &[&DenseMatrix]) -> Self {
        let rows = blocks.first().map_or(0, |b| b.rows);
        assert!(blocks.iter().all(|b| b.rows == rows), "hstack row mismatch");
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for b in blocks {
                out.data[i * cols + off..i * cols + off + b.cols].copy_from_slice(b.row(i));
                off += b.cols;
            }
        }
        out
    }

    pub fn vstack(blocks: &[&DenseMatrix]) -> Self {
        let cols = blocks.first().map_or(0, |b| b.cols);
        assert!(blocks.iter().all(|b| b.cols == cols), "vstack column mismatch");
        let mut data = Vec::new();
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        DenseMatrix { rows: data.len() / cols.max(1), cols, data }
    }

    /// Block-diagonal `[a 0; 0 b]`.
    pub fn block_diag(a: &DenseMatrix, b: &DenseMatrix) -> Self {
        let mut out = Self::zeros(a.rows + b.rows, a.cols + b.cols);
        for i in 0..a.rows {
            for j in 0..a.cols {
                out[(i, j)] = a[(i, j)];
            }
        }
        for i in 0..b.rows {
            for j in 0..b.cols {
                out[(a.rows + i, a.cols + j)] = b[(i, j)];
            }
        }
        out
    }

    pub fn lu(&self) -> Result<Lu, LinalgError> {
        Lu::new(self)
    }

    pub fn inverse(&self) -> Result<DenseMatrix, LinalgError> {
        let lu = self.lu()?;
        lu.solve_matrix(&DenseMatrix::identity(self.rows))
    }

    /// Solves `self * x = b` for square `self`.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        self.lu()?.solve_matrix(b)
    }

    pub fn determinant(&self) -> Result<f64, LinalgError> {
        match Lu::new(self) {
            Ok(lu) => Ok(lu.determinant()),
            Err(LinalgError::Singular) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul<&DenseMatrix> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: f64) -> DenseMatrix {
        self.scale(rhs)
    }
}

impl Add<&DenseMatrix> for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&DenseMatrix> for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols });
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= scale * 1e-300 || pmax == 0.0 {
                return Err(LinalgError::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm, sign })
    }

    pub fn determinant(&self) -> f64 {
        (0..self.n).map(|i| self.lu[i * self.n + i]).product::<f64>() * self.sign
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if b.rows != self.n {
            return Err(LinalgError::DimensionMismatch { expected: (self.n, b.cols), got: b.shape() });
        }
        let mut out = DenseMatrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let x = self.solve_vec(&b.col(j));
            out.set_col(j, &x);
        }
        Ok(out)
    }
}

/// Thin Householder QR of a tall matrix (`rows >= cols`): returns `(Q, R)` with
/// `Q` of shape `rows x cols` having orthonormal columns and `R` upper triangular.
pub fn thin_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = a.shape();
    assert!(m >= n, "thin_qr expects a tall matrix");
    // Work column-major for contiguous Householder updates.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let norm = w[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = w[k][k..].to_vec();
        if norm == 0.0 {
            vs.push(vec![0.0; m - k]);
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            vs.push(vec![0.0; m - k]);
            continue;
        }
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        for col in w.iter_mut().skip(k) {
            let d: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
            for (x, vi) in col[k..].iter_mut().zip(&v) {
                *x -= 2.0 * d * vi;
            }
        }
        vs.push(v);
    }
    let r = DenseMatrix::from_fn(n, n, |i, j| if i <= j { w[j][i] } else { 0.0 });
    // Q = H_0 ... H_{n-1} applied to the first n canonical vectors.
    let mut qcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for k in (0..n).rev() {
        let v = &vs[k];
        for col in qcols.iter_mut() {
            let d: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
            if d != 0.0 {
                for (x, vi) in col[k..].iter_mut().zip(v) {
                    *x -= 2.0 * d * vi;
                }
            }
        }
    }
    (DenseMatrix::from_columns(&qcols), r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_determinant() {
        let a = DenseMatrix::from_rows(&[&[4.0, 3.0], &[6.0, 3.0]]);
        assert!((a.determinant().unwrap() + 6.0).abs() < 1e-14);
        let inv = a.inverse().unwrap();
        let id = &a * &inv;
        assert!((&id - &DenseMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(a.inverse(), Err(LinalgError::Singular)));
        assert_eq!(a.determinant().unwrap(), 0.0);
    }

    #[test]
    fn transposed_products_agree() {
        let a = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.3 - 1.0);
        let b = DenseMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 0.5);
        let lhs = a.t_matmul(&b);
        let rhs = a.transpose().matmul(&b);
        assert!((&lhs - &rhs).max_abs() < 1e-14);
        let c = DenseMatrix::from_fn(5, 4, |i, j| ((i * j) as f64).sin());
        assert!((&a.matmul_t(&c) - &a.matmul(&c.transpose())).max_abs() < 1e-14);
    }

    #[test]
    fn thin_qr_reconstructs() {
        let a = DenseMatrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64 * 0.7).cos());
        let (q, r) = thin_qr(&a);
        assert!((&q.matmul(&r) - &a).max_abs() < 1e-13);
        assert!((&q.t_matmul(&q) - &DenseMatrix::identity(3)).max_abs() < 1e-13);
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(matches!(DenseMatrix::from_vec(2, 2, vec![1.0; 3]), Err(LinalgError::InvalidData { .. })));
        assert!(matches!(DenseMatrix::from_vec(1, 1, vec![f64::NAN]), Err(LinalgError::NonFinite)));
    }
}

use super::matrix::DenseMatrix;
use super::svd::svd;
use super::LinalgError;

/// `1e-12 * max(rows, cols)`, relative to the largest singular value.
pub fn default_pinv_tol(m: &DenseMatrix) -> f64 {
    1e-12 * m.rows().max(m.cols()) as f64
}

/// Moore–Penrose pseudoinverse. Singular values at or below `tol * s_max`
/// are treated as zero.
pub fn pinv(m: &DenseMatrix, tol: f64) -> Result<DenseMatrix, LinalgError> {
    if !(tol >= 0.0) {
        return Err(LinalgError::Argument(format!("pinv tolerance must be non-negative, got {tol}")));
    }
    let f = svd(m)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let mut out = DenseMatrix::zeros(m.cols(), m.rows());
    for (k, &s) in f.s.iter().enumerate() {
        if s <= tol * smax || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..m.cols() {
            let v = f.vt[(k, i)] * inv;
            if v == 0.0 {
                continue;
            }
            for j in 0..m.rows() {
                out[(i, j)] += v * f.u[(j, k)];
            }
        }
    }
    Ok(out)
}

pub fn pinv_default(m: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    pinv(m, default_pinv_tol(m))
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch { expected: (a.rows(), b.cols()), got: b.shape() });
    }
    Ok(pinv_default(a)?.matmul(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invertible_matches_inverse() {
        let a = DenseMatrix::from_rows(&[&[4.0, 7.0], &[2.0, 6.0]]);
        let p = pinv_default(&a).unwrap();
        let inv = a.inverse().unwrap();
        assert!((&p - &inv).max_abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let p = pinv_default(&DenseMatrix::zeros(3, 2)).unwrap();
        assert_eq!(p.shape(), (2, 3));
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn negative_tolerance_rejected() {
        assert!(pinv(&DenseMatrix::identity(2), -1.0).is_err());
    }

    #[test]
    fn overdetermined_lstsq() {
        // fit y = 1 + 2t exactly
        let a = DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0]]);
        let b = DenseMatrix::from_rows(&[&[1.0], &[3.0], &[5.0]]);
        let x = lstsq(&a, &b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12 && (x[(1, 0)] - 2.0).abs() < 1e-12);
    }
}

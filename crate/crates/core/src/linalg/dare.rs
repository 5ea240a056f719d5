//! Discrete algebraic Riccati equation by fixed-point iteration.

use super::matrix::DenseMatrix;
use super::LinalgError;

pub const DARE_MAX_ITERS: usize = 10_000;
/// Convergence threshold on the max-norm change, relative to `max(1, |P|max)`.
pub const DARE_TOL: f64 = 1e-12;

fn check_shapes(a: &DenseMatrix, b: &DenseMatrix, q: &DenseMatrix, r: &DenseMatrix) -> Result<(), LinalgError> {
    let n = a.rows();
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if b.rows() != n {
        return Err(LinalgError::DimensionMismatch { expected: (n, b.cols()), got: b.shape() });
    }
    if q.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch { expected: (n, n), got: q.shape() });
    }
    let m = b.cols();
    if r.shape() != (m, m) {
        return Err(LinalgError::DimensionMismatch { expected: (m, m), got: r.shape() });
    }
    if !(a.is_finite() && b.is_finite() && q.is_finite() && r.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

fn symmetrize(p: &mut DenseMatrix) {
    let n = p.rows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// One application of `P -> Q + AᵀPA − AᵀPB (R + BᵀPB)⁻¹ BᵀPA`.
pub fn riccati_map(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
    r: &DenseMatrix,
    p: &DenseMatrix,
) -> Result<DenseMatrix, LinalgError> {
    let pa = p.matmul(a);
    let pb = p.matmul(b);
    let s = r + &b.t_matmul(&pb);
    let btpa = b.t_matmul(&pa);
    let k = s.solve(&btpa)?;
    let mut next = &(q + &a.t_matmul(&pa)) - &a.t_matmul(&pb).matmul(&k);
    symmetrize(&mut next);
    Ok(next)
}

/// Stabilizing solution `P` of the DARE, iterated from `P₀ = Q`.
pub fn solve_dare(a: &DenseMatrix, b: &DenseMatrix, q: &DenseMatrix, r: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    check_shapes(a, b, q, r)?;
    let mut p = q.clone();
    symmetrize(&mut p);
    for it in 0..DARE_MAX_ITERS {
        let next = riccati_map(a, b, q, r, &p)?;
        if !next.is_finite() {
            return Err(LinalgError::NoConvergence { iterations: it + 1 });
        }
        let change = (&next - &p).max_abs();
        p = next;
        if change <= DARE_TOL * p.max_abs().max(1.0) {
            return Ok(p);
        }
    }
    Err(LinalgError::NoConvergence { iterations: DARE_MAX_ITERS })
}

/// Max-norm change when `P` is fed back through the Riccati map.
pub fn dare_residual(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
    r: &DenseMatrix,
    p: &DenseMatrix,
) -> Result<f64, LinalgError> {
    Ok((&riccati_map(a, b, q, r, p)? - p).max_abs())
}

/// Feedback gain `K = (R + BᵀPB)⁻¹ BᵀPA` for the control law `u = −K x`.
pub fn lqr_gain(a: &DenseMatrix, b: &DenseMatrix, r: &DenseMatrix, p: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let s = r + &b.t_matmul(&p.matmul(b));
    s.solve(&b.t_matmul(&p.matmul(a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[&[v]])
    }

    #[test]
    fn memoryless_system() {
        let p = solve_dare(&scalar(0.0), &scalar(1.0), &scalar(2.5), &scalar(1.0)).unwrap();
        assert!((p[(0, 0)] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn unstable_scalar_closed_form() {
        // p = q + a²p − a²b²p²/(r + b²p) -> b²p² + (r − a²r − qb²)p − qr = 0
        let (a, b, q, r) = (1.1_f64, 1.0_f64, 1.0_f64, 1.0_f64);
        let c1 = r - a * a * r - q * b * b;
        let want = (-c1 + (c1 * c1 + 4.0 * b * b * q * r).sqrt()) / (2.0 * b * b);
        let p = solve_dare(&scalar(a), &scalar(b), &scalar(q), &scalar(r)).unwrap();
        assert!((p[(0, 0)] - want).abs() < 1e-10);
    }

    #[test]
    fn shape_errors() {
        let e = solve_dare(&DenseMatrix::identity(2), &scalar(1.0), &DenseMatrix::identity(2), &scalar(1.0));
        assert!(matches!(e, Err(LinalgError::DimensionMismatch { .. })));
    }
}

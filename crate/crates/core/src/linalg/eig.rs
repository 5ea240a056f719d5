//! Eigendecomposition of small real matrices.
//!
//! Householder reduction to Hessenberg form, then single-shift complex QR
//! with Wilkinson shifts for the eigenvalues. Eigenvectors come from inverse
//! iteration on the original matrix. Conjugate pairs are symmetrized so a
//! real input yields exactly conjugate eigenpairs.

use num_complex::Complex64;

use super::matrix::DenseMatrix;
use super::LinalgError;

pub const MAX_EIG_DIM: usize = 64;
const MAX_ITERS_PER_VALUE: usize = 200;

#[derive(Clone, Debug)]
pub struct EigResult {
    /// Sorted by descending magnitude; conjugate pairs list `+Im` first.
    pub values: Vec<Complex64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`, phase fixed so
    /// its largest-magnitude entry is real and positive.
    pub vectors: Vec<Vec<Complex64>>,
}

impl EigResult {
    /// Largest `|λ|`.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub fn eig(a: &DenseMatrix) -> Result<EigResult, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    if n > MAX_EIG_DIM {
        return Err(LinalgError::Argument(format!("eig limited to dimension {MAX_EIG_DIM}, got {n}")));
    }
    if n == 0 {
        return Ok(EigResult { values: Vec::new(), vectors: Vec::new() });
    }
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut values = hessenberg_qr_values(&hessenberg(a))?;
    symmetrize_conjugates(&mut values, scale);
    values.sort_by(|x, y| {
        y.norm()
            .partial_cmp(&x.norm())
            .unwrap()
            .then(y.re.partial_cmp(&x.re).unwrap())
            .then(y.im.partial_cmp(&x.im).unwrap())
    });

    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for (i, &lambda) in values.iter().enumerate() {
        // The partner of a +Im value directly precedes it after sorting.
        if lambda.im < 0.0 && i > 0 && values[i - 1] == lambda.conj() {
            let partner: Vec<Complex64> = vectors[i - 1].iter().map(|z| z.conj()).collect();
            vectors.push(partner);
            continue;
        }
        vectors.push(inverse_iteration(a, lambda, scale));
    }
    Ok(EigResult { values, vectors })
}

/// Orthogonal similarity reduction to upper Hessenberg form.
fn hessenberg(a: &DenseMatrix) -> Vec<Vec<f64>> {
    let n = a.rows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| h[i][k] * h[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if h[k + 1][k] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k + 1..n).map(|i| h[i][k]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vn);
        // H = P H P with P = I - 2 v vᵀ acting on indices k+1..n
        for j in 0..n {
            let d: f64 = v.iter().enumerate().map(|(t, vi)| vi * h[k + 1 + t][j]).sum();
            for (t, vi) in v.iter().enumerate() {
                h[k + 1 + t][j] -= 2.0 * d * vi;
            }
        }
        for row in h.iter_mut() {
            let d: f64 = v.iter().enumerate().map(|(t, vi)| vi * row[k + 1 + t]).sum();
            for (t, vi) in v.iter().enumerate() {
                row[k + 1 + t] -= 2.0 * d * vi;
            }
        }
        for row in h.iter_mut().skip(k + 2) {
            row[k] = 0.0;
        }
    }
    h
}

fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let r = ax.hypot(ay);
    let c = ax / r;
    let s = (x / ax) * y.conj() / r;
    (c, s)
}

fn hessenberg_qr_values(hr: &[Vec<f64>]) -> Result<Vec<Complex64>, LinalgError> {
    let n = hr.len();
    let mut h: Vec<Vec<Complex64>> =
        hr.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
    let hnorm = hr.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let eps = f64::EPSILON;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    let mut hi = n - 1;
    let mut its = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            values[0] = h[0][0];
            break;
        }
        let mut l = hi;
        while l > 0 {
            let s = h[l - 1][l - 1].norm() + h[l][l].norm();
            let s = if s == 0.0 { hnorm } else { s };
            if h[l][l - 1].norm() <= eps * s {
                h[l][l - 1] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            values[hi] = h[hi][hi];
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if its > MAX_ITERS_PER_VALUE {
            return Err(LinalgError::NoConvergence { iterations: total });
        }
        let mu = if its % 11 == 0 {
            // exceptional shift to break cycles
            h[hi][hi] + Complex64::new(0.75 * h[hi][hi - 1].norm(), 0.0)
        } else {
            wilkinson_shift(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };
        // Implicit single-shift QR sweep over the active block l..=hi.
        let mut x = h[l][l] - mu;
        let mut y = h[l + 1][l];
        for k in l..hi {
            let (c, s) = givens(x, y);
            let jstart = if k > l { k - 1 } else { l };
            for j in jstart..=hi {
                let (a1, a2) = (h[k][j], h[k + 1][j]);
                h[k][j] = a1 * c + s * a2;
                h[k + 1][j] = -s.conj() * a1 + a2 * c;
            }
            let iend = (k + 2).min(hi);
            for row in h.iter_mut().take(iend + 1).skip(l) {
                let (a1, a2) = (row[k], row[k + 1]);
                row[k] = a1 * c + s.conj() * a2;
                row[k + 1] = -s * a1 + a2 * c;
            }
            if k + 1 < hi {
                x = h[k + 1][k];
                y = h[k + 2][k];
            }
        }
    }
    Ok(values)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let tr_half = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let l1 = tr_half + root;
    let l2 = tr_half - root;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn symmetrize_conjugates(values: &mut [Complex64], scale: f64) {
    let tol = 1e-10 * scale.max(1.0);
    let n = values.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        if values[i].im.abs() <= tol {
            values[i].im = 0.0;
            paired[i] = true;
        }
    }
    for i in 0..n {
        if paired[i] || values[i].im < 0.0 {
            continue;
        }
        let target = values[i].conj();
        let partner = (0..n)
            .filter(|&j| !paired[j] && j != i && values[j].im < 0.0)
            .min_by(|&p, &q| (values[p] - target).norm().partial_cmp(&(values[q] - target).norm()).unwrap());
        if let Some(j) = partner {
            let avg = (values[i] + values[j].conj()) * 0.5;
            values[i] = avg;
            values[j] = avg.conj();
            paired[i] = true;
            paired[j] = true;
        }
    }
}

fn inverse_iteration(a: &DenseMatrix, lambda: Complex64, scale: f64) -> Vec<Complex64> {
    let n = a.rows();
    let shift = lambda + Complex64::new(1e-10 * scale, 0.0);
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| Complex64::new(a[(i, j)], 0.0) - if i == j { shift } else { 0.0.into() }).collect())
        .collect();
    let perm = complex_lu(&mut m, scale);
    let mut v: Vec<Complex64> = (0..n).map(|j| Complex64::new(1.0 + j as f64 / n as f64, 0.0)).collect();
    for _ in 0..4 {
        v = complex_lu_solve(&m, &perm, &v);
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            break;
        }
        v.iter_mut().for_each(|z| *z /= nrm);
    }
    normalize_phase(&mut v);
    v
}

/// Unit 2-norm with the largest-magnitude entry rotated onto the positive real axis.
pub fn normalize_phase(v: &mut [Complex64]) {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return;
    }
    v.iter_mut().for_each(|z| *z /= nrm);
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap();
    let phase = v[pivot] / v[pivot].norm();
    v.iter_mut().for_each(|z| *z /= phase);
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

fn complex_lu(m: &mut [Vec<Complex64>], scale: f64) -> Vec<usize> {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].norm().partial_cmp(&m[j][k].norm()).unwrap()).unwrap();
        m.swap(k, p);
        perm.swap(k, p);
        if m[k][k].norm() < tiny {
            m[k][k] = Complex64::new(tiny, 0.0);
        }
        let pivot = m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / pivot;
            m[i][k] = f;
            for j in k + 1..n {
                let t = m[k][j];
                m[i][j] -= f * t;
            }
        }
    }
    perm
}

fn complex_lu_solve(lu: &[Vec<Complex64>], perm: &[usize], b: &[Complex64]) -> Vec<Complex64> {
    let n = lu.len();
    let mut x: Vec<Complex64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            let t = lu[i][j] * x[j];
            x[i] -= t;
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let t = lu[i][j] * x[j];
            x[i] -= t;
        }
        x[i] /= lu[i][i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &DenseMatrix, r: &EigResult) -> f64 {
        let n = a.rows();
        let mut worst = 0.0_f64;
        for (lambda, v) in r.values.iter().zip(&r.vectors) {
            let mut res = 0.0;
            for i in 0..n {
                let av: Complex64 = (0..n).map(|j| v[j] * a[(i, j)]).sum();
                res += (av - lambda * v[i]).norm_sqr();
            }
            worst = worst.max(res.sqrt());
        }
        worst
    }

    #[test]
    fn diagonal_matrix() {
        let a = DenseMatrix::from_diag(&[5.0, -1.0]);
        let r = eig(&a).unwrap();
        assert_eq!(r.values, vec![Complex64::new(5.0, 0.0), Complex64::new(-1.0, 0.0)]);
        assert!((r.vectors[0][0] - 1.0).norm() < 1e-12 && r.vectors[0][1].norm() < 1e-12);
        assert!((r.vectors[1][1] - 1.0).norm() < 1e-12 && r.vectors[1][0].norm() < 1e-12);
    }

    #[test]
    fn rotation_spectrum() {
        let t = std::f64::consts::FRAC_PI_4;
        let a = DenseMatrix::from_rows(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]]);
        let r = eig(&a).unwrap();
        assert!((r.values[0] - Complex64::new(t.cos(), t.sin())).norm() < 1e-12);
        assert!((r.values[1] - Complex64::new(t.cos(), -t.sin())).norm() < 1e-12);
        assert_eq!(r.values[0], r.values[1].conj());
        assert!(residual(&a, &r) < 1e-10);
    }

    #[test]
    fn companion_matrix_with_repeated_structure() {
        // roots 1, 2, 3, 4
        let a = DenseMatrix::from_rows(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let r = eig(&a).unwrap();
        for (got, want) in r.values.iter().zip([4.0, 3.0, 2.0, 1.0]) {
            assert!((got - want).norm() < 1e-9, "{got} vs {want}");
        }
        assert!(residual(&a, &r) < 1e-8 * a.frobenius_norm());
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(eig(&DenseMatrix::zeros(2, 3)), Err(LinalgError::NotSquare { .. })));
    }
}

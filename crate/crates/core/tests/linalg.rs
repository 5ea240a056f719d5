mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use romlab::linalg::*;

/// Classical cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

#[test]
fn svd_matches_symmetric_eigen_oracle() {
    let m = random_matrix(&mut rng(1), 8, 5);
    let f = svd(&m).unwrap();
    assert!(rel(&f.reconstruct(), &m) <= 1e-12);
    let mut want: Vec<f64> = symmetric_eigenvalues(&m.t_matmul(&m)).iter().map(|v| v.max(0.0).sqrt()).collect();
    want.reverse();
    for (s, w) in f.s.iter().zip(&want) {
        assert!((s - w).abs() <= 1e-12 * want[0], "{s} vs {w}");
    }
}

#[test]
fn eckart_young_residual() {
    let m = random_matrix(&mut rng(2), 10, 6);
    let full = svd(&m).unwrap();
    let t = truncated_svd(&m, 3).unwrap();
    let resid = (&m - &t.reconstruct()).frobenius_norm().powi(2);
    let tail: f64 = full.s[3..].iter().map(|s| s * s).sum();
    assert!((resid - tail).abs() <= 1e-10, "{resid} vs {tail}");
    let whole = truncated_svd(&m, 6).unwrap();
    assert!((&whole.reconstruct() - &full.reconstruct()).max_abs() <= 1e-13);
}

#[test]
fn penrose_conditions_on_rank_deficient() {
    let mut g = rng(3);
    let m = random_matrix(&mut g, 6, 2).matmul(&random_matrix(&mut g, 2, 4));
    let p = pinv_default(&m).unwrap();
    let mpm = m.matmul(&p).matmul(&m);
    let pmp = p.matmul(&m).matmul(&p);
    assert!((&mpm - &m).max_abs() <= 1e-12);
    assert!((&pmp - &p).max_abs() <= 1e-12);
    assert!(m.matmul(&p).is_symmetric(1e-12));
    assert!(p.matmul(&m).is_symmetric(1e-12));
}

#[test]
fn eigenvalue_product_is_determinant() {
    let a = random_matrix(&mut rng(4), 5, 5);
    let e = eig(&a).unwrap();
    let prod = e.values.iter().fold(Complex64::new(1.0, 0.0), |p, v| p * v);
    let det = a.determinant().unwrap();
    assert!((prod - det).norm() <= 1e-8 * det.abs(), "{prod} vs {det}");
    let tr: Complex64 = e.values.iter().sum();
    assert!((tr - a.trace()).norm() <= 1e-10);
}

#[test]
fn dare_scalar_quadratic_root() {
    // p = q + a²p − a²p²b²/(r + b²p)  ⇔  b²p² + (r − a²r − q b²)p − q r = 0
    let (a, b, q, r): (f64, f64, f64, f64) = (0.5, 1.0, 1.0, 1.0);
    let bq = r - a * a * r - q * b * b;
    let want = (-bq + (bq * bq + 4.0 * b * b * q * r).sqrt()) / (2.0 * b * b);
    let m = |v: f64| DenseMatrix::from_rows(&[&[v]]);
    let p = solve_dare(&m(a), &m(b), &m(q), &m(r)).unwrap();
    assert!((p[(0, 0)] - want).abs() <= 1e-12);
}

#[test]
fn dare_closed_loop_is_stable() {
    let mut g = rng(5);
    for _ in 0..10 {
        let a = random_matrix(&mut g, 2, 2).scale(1.5);
        let b = random_matrix(&mut g, 2, 1);
        let (q, r) = (DenseMatrix::identity(2), DenseMatrix::identity(1));
        let p = solve_dare(&a, &b, &q, &r).unwrap();
        assert!(dare_residual(&a, &b, &q, &r, &p).unwrap() <= 1e-9 * p.max_abs().max(1.0));
        let k = lqr_gain(&a, &b, &r, &p).unwrap();
        let cl = &a - &b.matmul(&k);
        assert!(eig(&cl).unwrap().spectral_radius() < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn svd_reconstructs(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..12) {
        let m = random_matrix(&mut rng(seed), rows, cols);
        let f = svd(&m).unwrap();
        prop_assert!(rel(&f.reconstruct(), &m) <= 1e-12);
    }

    #[test]
    fn truncation_is_eckart_young_optimal(seed in any::<u64>(), r in 1usize..6) {
        let m = random_matrix(&mut rng(seed), 9, 6);
        let m = m.scale(1.0 / m.frobenius_norm());
        let full = svd(&m).unwrap();
        let t = truncated_svd(&m, r).unwrap();
        let resid = (&m - &t.reconstruct()).frobenius_norm().powi(2);
        let tail: f64 = full.s[r..].iter().map(|s| s * s).sum();
        prop_assert!((resid - tail).abs() <= 1e-10);
    }

    #[test]
    fn pinv_is_an_involution(seed in any::<u64>(), rows in 2usize..8, extra in 0usize..4) {
        let m = random_matrix(&mut rng(seed), rows + extra, rows);
        let back = pinv_default(&pinv_default(&m).unwrap()).unwrap();
        prop_assert!((&back - &m).max_abs() <= 1e-10);
    }

    #[test]
    fn eigenpairs_are_consistent(seed in any::<u64>(), n in 1usize..8) {
        let a = random_matrix(&mut rng(seed), n, n);
        let e = eig(&a).unwrap();
        for (lambda, v) in e.values.iter().zip(&e.vectors) {
            let res: f64 = (0..n)
                .map(|i| ((0..n).map(|j| v[j] * a[(i, j)]).sum::<Complex64>() - lambda * v[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            prop_assert!(res <= 1e-8 * a.frobenius_norm().max(1.0), "residual {}", res);
        }
    }

    #[test]
    fn dare_is_stationary(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_matrix(&mut g, 3, 3);
        let b = random_matrix(&mut g, 3, 2);
        let (q, r) = (DenseMatrix::identity(3), DenseMatrix::identity(2));
        let p = solve_dare(&a, &b, &q, &r).unwrap();
        prop_assert!(dare_residual(&a, &b, &q, &r, &p).unwrap() <= 1e-9 * p.max_abs().max(1.0));
    }
}

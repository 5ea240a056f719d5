mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use romlab::linalg::{eig, lstsq, svd_full, thin_qr, truncated_svd, DenseMatrix};
use romlab::linear_rom::*;
use romlab::pde::{generate_dataset, Grid, SimParams};

fn latent_system(seed: u64, d_x: usize, r: usize, d_u: usize) -> (DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix) {
    let mut g = rng(seed);
    let v = orthonormal(&mut g, d_x, r);
    let m = stable_latent(&mut g, r);
    let c = random_matrix(&mut g, r, d_u);
    let a = v.matmul(&m).matmul_t(&v);
    let b = v.matmul(&c);
    (a, b, v, m)
}

fn latent_trajectories(a: &DenseMatrix, b: &DenseMatrix, v: &DenseMatrix, count: usize, steps: usize, seed: u64) -> Trajectories {
    let mut g = rng(seed);
    let x0s: Vec<Vec<f64>> = (0..count).map(|_| v.matvec(&random_vec(&mut g, v.cols()))).collect();
    simulate_linear(a, b, &x0s, steps, &mut g)
}

// ---- snapshots ----

#[test]
fn snapshot_counts_and_blocks() {
    let states = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
    let inputs = vec![vec![0.5], vec![-0.5]];
    let s = assemble_trajectories(&[(&states, &inputs)]).unwrap();
    assert_eq!((s.y.cols(), s.omega.cols()), (2, 2));
    assert_eq!(s.y.col(0), vec![3.0, 4.0]);
    assert_eq!(s.y.col(1), vec![5.0, 6.0]);
    assert_eq!(s.omega.col(0), vec![1.0, 2.0, 0.5]);
    assert_eq!(s.omega.col(1), vec![3.0, 4.0, -0.5]);

    let other = vec![vec![7.0, 8.0], vec![9.0, 10.0]];
    let s2 = assemble_trajectories(&[(&states, &inputs), (&other, &inputs[..1])]).unwrap();
    assert_eq!(s2.n(), 3);
    // no pair bridges the two trajectories
    assert_eq!(s2.omega.col(2), vec![7.0, 8.0, 0.5]);
    assert_eq!(s2.y.col(2), vec![9.0, 10.0]);
}

#[test]
fn snapshot_blocks_match_dataset() {
    let ds = generate_dataset(2, 4, 1, 0, &SimParams::default(), &Grid { nodes: 16, ..Grid::default() }).unwrap();
    let s = assemble_snapshots(&ds).unwrap();
    assert_eq!((s.d_x(), s.d_u, s.n()), (16, 1, 8));
    for (k, seq) in ds.sequences.iter().enumerate() {
        for i in 0..4 {
            let col = k * 4 + i;
            assert_eq!(s.x().col(col), seq.states[i]);
            assert_eq!(s.u()[(0, col)], seq.actuations[i]);
            assert_eq!(s.y.col(col), seq.states[i + 1]);
        }
    }
}

#[test]
fn snapshot_shape_errors() {
    let states = vec![vec![1.0, 2.0], vec![3.0]];
    let inputs = vec![vec![0.0]];
    assert!(assemble_trajectories(&[(&states, &inputs)]).is_err());
    let short = vec![vec![1.0, 2.0]];
    assert!(assemble_trajectories(&[(&short, &inputs)]).is_err());
    assert!(assemble_trajectories(&[]).is_err());
    assert!(SnapshotMatrices::new(DenseMatrix::zeros(2, 3), DenseMatrix::zeros(3, 4), 1).is_err());
}

// ---- DMDc ----

#[test]
fn dmdc_is_exact_on_low_rank_linear_data() {
    let (d_x, r, d_u) = (16, 5, 2);
    let (a, b, v, m) = latent_system(3, d_x, r, d_u);
    let snap = latent_trajectories(&a, &b, &v, 6, 10, 4).snapshots();
    let rom = fit_dmdc(&snap, r, r + d_u).unwrap();

    let held = latent_trajectories(&a, &b, &v, 3, 5, 99);
    for (xs, us) in held.states.iter().zip(&held.inputs) {
        for (i, u) in us.iter().enumerate() {
            let pred = rom.predict(&xs[i], u).unwrap();
            let err: f64 = pred.iter().zip(&xs[i + 1]).map(|(p, t)| (p - t).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = xs[i + 1].iter().map(|t| t * t).sum::<f64>().sqrt();
            assert!(err / norm <= 1e-8, "relative error {}", err / norm);
        }
    }

    let want = eig(&m).unwrap().values;
    let got = eig(&rom.a_r).unwrap().values;
    for (w, g) in want.iter().zip(&got) {
        assert!((w - g).norm() <= 1e-6, "{w} vs {g}");
    }
}

#[test]
fn dmdc_encoder_is_orthonormal() {
    let snap = random_snapshots(5, 10, 2, 30);
    let rom = fit_dmdc(&snap, 3, 6).unwrap();
    let eet = rom.e.matmul_t(&rom.e);
    assert!((&eet - &DenseMatrix::identity(3)).max_abs() <= 1e-10);
    assert_eq!(rom.d, rom.e.transpose());
}

#[test]
fn dmdc_zero_input_gives_null_input_block() {
    let (d_x, r) = (12, 4);
    let (a, _, v, _) = latent_system(8, d_x, r, 1);
    let b = DenseMatrix::zeros(d_x, 1);
    let mut tr = latent_trajectories(&a, &b, &v, 4, 10, 2);
    tr.inputs.iter_mut().flatten().for_each(|u| u[0] = 0.0);
    let rom = fit_dmdc(&tr.snapshots(), 2, r).unwrap();
    for j in 0..rom.b_r.cols() {
        let norm: f64 = rom.b_r.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= 1e-8, "B_R column {j} has norm {norm}");
    }
}

#[test]
fn dmdc_argument_and_rank_errors() {
    let snap = random_snapshots(1, 6, 1, 20);
    assert!(matches!(fit_dmdc(&snap, 3, 3), Err(LinearRomError::Argument(_))));
    assert!(matches!(fit_dmdc(&snap, 0, 3), Err(LinearRomError::Argument(_))));
    assert!(matches!(fit_dmdc(&snap, 3, 8), Err(LinearRomError::Argument(_))));
    let (a, b, v, _) = latent_system(2, 10, 3, 1);
    let low = latent_trajectories(&a, &b, &v, 3, 10, 1).snapshots();
    match fit_dmdc(&low, 2, 6) {
        Err(LinearRomError::RankDeficient { rank, requested }) => assert_eq!((rank, requested), (4, 6)),
        other => panic!("expected rank error, got {other:?}"),
    }
}

#[test]
fn default_rxu_stays_in_window() {
    let snap = random_snapshots(2, 6, 1, 20);
    assert_eq!(default_rxu(&snap, 3).unwrap(), 7);
    let (a, b, v, _) = latent_system(2, 10, 3, 1);
    let low = latent_trajectories(&a, &b, &v, 3, 10, 1).snapshots();
    assert_eq!(default_rxu(&low, 2).unwrap(), 4);
}

// ---- prediction ----

#[test]
fn predict_trivial_cases() {
    let snap = random_snapshots(3, 6, 2, 20);
    let rom = fit_dmdc(&snap, 2, 4).unwrap();
    assert!(rom.predict(&[0.0; 6], &[0.0; 2]).unwrap().iter().all(|&v| v == 0.0));

    // E = D = first-k identity slice, A = I, B = 0: projection onto the first k coordinates
    let e = DenseMatrix::from_fn(2, 4, |i, j| (i == j) as u8 as f64);
    let id = LinearROM::new(e.clone(), e.transpose(), DenseMatrix::identity(2), DenseMatrix::zeros(2, 1)).unwrap();
    assert_eq!(id.predict(&[1.0, 2.0, 3.0, 4.0], &[5.0]).unwrap(), vec![1.0, 2.0, 0.0, 0.0]);
    assert!(id.predict(&[1.0, 2.0, 3.0], &[5.0]).is_err());
}

#[test]
fn predict_matches_explicit_product() {
    let mut g = rng(4);
    let rom = LinearROM::new(random_matrix(&mut g, 3, 7), random_matrix(&mut g, 7, 3), random_matrix(&mut g, 3, 3), random_matrix(&mut g, 3, 2))
        .unwrap();
    let x = random_vec(&mut g, 7);
    let u = random_vec(&mut g, 2);
    let xm = DenseMatrix::from_columns(&[x.clone()]);
    let um = DenseMatrix::from_columns(&[u.clone()]);
    let want = rom.d.matmul(&(&rom.a_r.matmul(&rom.e.matmul(&xm)) + &rom.b_r.matmul(&um)));
    let got = rom.predict(&x, &u).unwrap();
    for (i, v) in got.iter().enumerate() {
        assert!((v - want[(i, 0)]).abs() <= 1e-14);
    }

    let us = vec![u.clone(), random_vec(&mut g, 2)];
    let traj = rom.rollout(&x, &us).unwrap();
    assert_eq!(traj.len(), 3);
    let z2 = rom.latent_step(&rom.latent_step(&rom.encode(&x), &us[0]), &us[1]);
    assert_eq!(traj[2], rom.decode(&z2));
}

// ---- fixed-encoder solutions ----

#[test]
fn closed_form_recovers_planted_reduced_model() {
    let (d_x, r, d_u) = (8, 3, 2);
    let mut g = rng(6);
    let e = orthonormal(&mut g, d_x, r).transpose();
    let a = stable_latent(&mut g, r);
    let b = random_matrix(&mut g, r, d_u);
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    for _ in 0..4 {
        let mut z = random_vec(&mut g, r);
        let mut xs = vec![e.transpose().matvec(&z)];
        let mut us = Vec::new();
        for _ in 0..10 {
            let u = random_vec(&mut g, d_u);
            let mut zn = a.matvec(&z);
            zn.iter_mut().zip(b.matvec(&u)).for_each(|(p, q)| *p += q);
            z = zn;
            xs.push(e.transpose().matvec(&z));
            us.push(u);
        }
        states.push(xs);
        inputs.push(us);
    }
    let snap = Trajectories { states, inputs }.snapshots();
    let cf = closed_form_g(&snap, &e).unwrap();
    assert!(cf.ridge.is_none());
    assert!(rel(&cf.g, &DenseMatrix::hstack(&[&a, &b])) <= 1e-10);
}

#[test]
fn closed_form_full_state_regression() {
    // no input channel, E = I: plain least-squares identification of A
    let mut g = rng(9);
    let a = stable_latent(&mut g, 5);
    let x0s: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut g, 5)).collect();
    let snap = simulate_linear(&a, &DenseMatrix::zeros(5, 0), &x0s, 10, &mut g).snapshots();
    let cf = closed_form_g(&snap, &DenseMatrix::identity(5)).unwrap();
    assert!(cf.ridge.is_none());
    assert!(rel(&cf.g, &a) <= 1e-10);
}

#[test]
fn closed_form_ridge_fallback_on_zero_input() {
    let mut g = rng(10);
    let a = stable_latent(&mut g, 5);
    let x0s: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut g, 5)).collect();
    let mut tr = simulate_linear(&a, &DenseMatrix::zeros(5, 1), &x0s, 10, &mut g);
    tr.inputs.iter_mut().flatten().for_each(|u| u[0] = 0.0);
    let snap = tr.snapshots();
    let e = DenseMatrix::identity(5);
    assert!(matches!(closed_form_g_with(&snap, &e, false), Err(LinearRomError::SingularGram)));
    let cf = closed_form_g(&snap, &e).unwrap();
    assert!(cf.ridge.is_some());
    let (ar, br) = split_g(&cf.g);
    // ridge of 1e-8 · mean eigenvalue perturbs the state block at that order
    assert!(rel(&ar, &a) <= 1e-6, "{}", rel(&ar, &a));
    assert_eq!(br.max_abs(), 0.0);
}

#[test]
fn closed_form_normal_equation_residual() {
    let snap = random_snapshots(11, 8, 2, 40);
    let e = random_matrix(&mut rng(12), 3, 8);
    let cf = closed_form_g(&snap, &e).unwrap();
    assert!(cf.residual <= 1e-8, "residual {}", cf.residual);
    assert!((normal_equation_residual(&snap, &e, &cf.g).unwrap() - cf.residual).abs() < 1e-15);
    // a perturbed G violates the normal equations
    let off = &cf.g + &DenseMatrix::from_fn(3, 5, |_, _| 1e-3);
    assert!(normal_equation_residual(&snap, &e, &off).unwrap() > 1e-5);
}

#[test]
fn closed_form_matches_independent_lstsq() {
    // min_G ‖E Y − G W‖ solved as Wᵀ Gᵀ = (E Y)ᵀ by the pseudoinverse
    let snap = random_snapshots(13, 8, 2, 40);
    let e = random_matrix(&mut rng(14), 3, 8);
    let w = DenseMatrix::block_diag(&e, &DenseMatrix::identity(2)).matmul(&snap.omega);
    let want = lstsq(&w.transpose(), &e.matmul(&snap.y).transpose()).unwrap().transpose();
    assert!(rel(&closed_form_g(&snap, &e).unwrap().g, &want) <= 1e-10);
}

#[test]
fn pinv_form_agrees_with_closed_form() {
    let snap = random_snapshots(15, 8, 2, 40);
    let uy = truncated_svd(&snap.y, 3).unwrap().u;
    let cf = closed_form_g(&snap, &uy.transpose()).unwrap();
    assert!(rel(&pinv_form_g(&snap, 3).unwrap(), &cf.g) <= 1e-9);
}

#[test]
fn pinv_form_matches_sigma_star_assembly() {
    // A_R = Û_Yᵀ Y V_Ω Σ* U_{Ω,1}ᵀ Û_Y, B_R = Û_Yᵀ Y V_Ω Σ* U_{Ω,2}ᵀ, with
    // Σ* = lim_{ε→0} (Σᵀ U₁ᵀ Û Ûᵀ U₁ Σ + Σᵀ U₂ᵀ U₂ Σ + ε² I)⁻¹ Σᵀ taken numerically.
    let (d_x, d_u, n, r) = (8, 2, 40, 3);
    let snap = random_snapshots(16, d_x, d_u, n);
    let uy = truncated_svd(&snap.y, r).unwrap().u;
    let f = svd_full(&snap.omega).unwrap();
    let sigma = f.sigma();
    let u1 = f.u.rows_range(0..d_x);
    let u2 = f.u.rows_range(d_x..d_x + d_u);
    let p = uy.t_matmul(&u1).matmul(&sigma);
    let q = u2.matmul(&sigma);
    let gram = &p.t_matmul(&p) + &q.t_matmul(&q);
    let lead = uy.t_matmul(&snap.y).matmul(&f.v);
    let target = pinv_form_g(&snap, r).unwrap();
    let mut errs = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let mut reg = gram.clone();
        for i in 0..n {
            reg[(i, i)] += eps * eps;
        }
        let sigma_star = reg.solve(&sigma.transpose()).unwrap();
        let a_r = lead.matmul(&sigma_star).matmul(&u1.transpose()).matmul(&uy);
        let b_r = lead.matmul(&sigma_star).matmul(&u2.transpose());
        errs.push(rel(&DenseMatrix::hstack(&[&a_r, &b_r]), &target));
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] <= 1e-6, "{errs:?}");
}

#[test]
fn truncated_form_full_rank_limit_and_monotone_sweep() {
    let snap = near_low_rank(0, 8, 2, 3, 1e-2, 4, 10);
    let limit = pinv_form_g(&snap, 3).unwrap();
    let gaps: Vec<f64> = (4..=10).map(|k| rel(&truncated_form_g(&snap, 3, k).unwrap(), &limit)).collect();
    assert!(gaps[6] <= 1e-12);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn pred_loss_at_closed_form_is_minimal() {
    let snap = random_snapshots(17, 8, 2, 40);
    let e = random_matrix(&mut rng(18), 3, 8);
    let g = closed_form_g(&snap, &e).unwrap().g;
    let l0 = pred_loss(&snap, &e, &g).unwrap();
    let mut r = rng(19);
    for _ in 0..10 {
        let d = random_matrix(&mut r, 3, 5).scale(1e-3);
        assert!(pred_loss(&snap, &e, &(&g + &d)).unwrap() > l0);
    }
}

// ---- LAROM ----

#[test]
fn larom_frozen_encoder_reaches_closed_form() {
    let snap = random_snapshots(20, 8, 2, 40);
    let e = random_matrix(&mut rng(21), 3, 8);
    let cf = closed_form_g(&snap, &e).unwrap();
    let fit = fit_larom_frozen(&snap, &e, &LaromConfig { grad_tol: 1e-9, ..LaromConfig::default() }).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.rom.e, e);
    assert!(rel(&fit.rom.g(), &cf.g) <= 1e-4, "{}", rel(&fit.rom.g(), &cf.g));
}

#[test]
fn larom_reaches_stationarity() {
    let snap = near_low_rank(1, 8, 1, 2, 1e-2, 4, 10);
    let cfg = LaromConfig { r_x: 2, ..LaromConfig::default() };
    let fit = fit_larom(&snap, &cfg).unwrap();
    assert!(fit.converged, "grad {} after {} iterations", fit.grad_norm, fit.iterations);
    assert!(fit.grad_norm <= 1e-6 * (1.0 + fit.loss.abs()));
    assert_eq!(fit.rom.d, fit.rom.e.transpose());
    assert!((larom_loss(&snap, &fit.rom.e, &fit.rom.g(), &cfg).unwrap() - fit.loss).abs() <= 1e-12 * (1.0 + fit.loss));
    // the encoder spans the dominant subspace of Y
    let uy = truncated_svd(&snap.y, 2).unwrap().u;
    let proj = uy.t_matmul(&fit.rom.e.transpose());
    let s = romlab::linalg::svd(&proj).unwrap().s;
    assert!(s.iter().all(|&v| (v - 1.0).abs() < 1e-2), "{s:?}");
}

#[test]
fn larom_is_deterministic() {
    let snap = random_snapshots(22, 6, 1, 20);
    let cfg = LaromConfig { r_x: 2, iterations: 50, ..LaromConfig::default() };
    let a = fit_larom(&snap, &cfg).unwrap();
    let b = fit_larom(&snap, &cfg).unwrap();
    assert_eq!(a.rom, b.rom);
    assert_eq!(a.history, b.history);
}

#[test]
fn larom_divergence_and_config_errors() {
    let snap = random_snapshots(23, 6, 1, 20);
    match fit_larom(&snap, &LaromConfig { r_x: 2, iterations: 10, lr: 1e200, ..LaromConfig::default() }) {
        Err(LinearRomError::Diverged { .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
    assert!(fit_larom(&snap, &LaromConfig { beta1: 0.0, ..LaromConfig::default() }).is_err());
    assert!(fit_larom(&snap, &LaromConfig { lr_decay: 1.5, ..LaromConfig::default() }).is_err());
    assert!(serde_json::from_str::<LaromConfig>(r#"{"r_x": 2, "bogus": 1}"#).is_err());
}

// ---- modes ----

fn rom_with(a_r: DenseMatrix, d: DenseMatrix) -> LinearROM {
    let r = a_r.rows();
    LinearROM::new(d.transpose(), d, a_r, DenseMatrix::zeros(r, 1)).unwrap()
}

#[test]
fn diagonal_dynamics_give_decoder_columns() {
    let d = orthonormal(&mut rng(24), 6, 3);
    let set = dynamic_modes(&rom_with(DenseMatrix::from_diag(&[0.5, 0.9, -0.7]), d.clone())).unwrap();
    let order = [1, 2, 0];
    for (mode, &k) in set.modes.iter().zip(&order) {
        let col = d.col(k);
        let sign = col.iter().fold(0.0_f64, |m, &v| if v.abs() > m.abs() { v } else { m }).signum();
        for (p, c) in mode.iter().zip(&col) {
            assert!((p - Complex64::new(sign * c, 0.0)).norm() <= 1e-12);
        }
    }
    assert_eq!(set.eigenvalues.iter().map(|z| z.re).collect::<Vec<_>>(), vec![0.9, -0.7, 0.5]);
}

#[test]
fn conjugate_pair_gives_conjugate_modes() {
    let a = DenseMatrix::from_rows(&[&[0.8, -0.3, 0.0], &[0.3, 0.8, 0.0], &[0.0, 0.0, 0.2]]);
    let d = orthonormal(&mut rng(25), 5, 3);
    let set = dynamic_modes(&rom_with(a, d)).unwrap();
    assert!((set.eigenvalues[0] - set.eigenvalues[1].conj()).norm() < 1e-12);
    for (p, q) in set.modes[0].iter().zip(&set.modes[1]) {
        assert!((p - q.conj()).norm() < 1e-12);
    }
}

#[test]
fn modes_satisfy_eigen_relation() {
    let mut g = rng(26);
    let a = random_matrix(&mut g, 4, 4);
    let d = random_matrix(&mut g, 9, 4);
    let set = dynamic_modes(&rom_with(a.clone(), d.clone())).unwrap();
    let e = eig(&a).unwrap();
    for ((lambda, z), phi) in e.values.iter().zip(&e.vectors).zip(&set.modes) {
        let az: Vec<Complex64> = (0..4).map(|i| (0..4).map(|j| z[j] * a[(i, j)]).sum()).collect();
        let res: f64 = az.iter().zip(z).map(|(l, r)| (l - lambda * r).norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-8, "eigen residual {res}");
        // φ ∝ D z with unit norm
        let dz: Vec<Complex64> = (0..9).map(|i| (0..4).map(|j| z[j] * d[(i, j)]).sum()).collect();
        let nrm = dz.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let overlap: Complex64 = phi.iter().zip(&dz).map(|(p, q)| p.conj() * q).sum();
        assert!((overlap.norm() / nrm - 1.0).abs() <= 1e-8);
        assert!((phi.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn match_self_and_sign_flip() {
    let mut g = rng(27);
    let set = dynamic_modes(&rom_with(random_matrix(&mut g, 3, 3), random_matrix(&mut g, 7, 3))).unwrap();
    let rep = match_modes(&set, &set).unwrap();
    assert!(rep.pairs.iter().all(|p| (p.score - 1.0).abs() < 1e-12 && p.a == p.b));
    let mut flipped = set.clone();
    flipped.modes.iter_mut().for_each(|m| m.iter_mut().for_each(|c| *c = -*c));
    let rep = match_modes(&set, &flipped).unwrap();
    assert!((rep.mean_score - 1.0).abs() < 1e-12);
    let mut short = set.clone();
    short.modes.pop();
    short.eigenvalues.pop();
    assert!(match_modes(&set, &short).is_err());
}

#[test]
fn modes_csv_layout() {
    let set = dynamic_modes(&rom_with(DenseMatrix::from_diag(&[0.5, 0.9]), orthonormal(&mut rng(28), 4, 2))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("modes.csv");
    write_modes_csv(&path, &[0.0, 0.1, 0.2, 0.3], &set).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "zeta,re_phi_0,im_phi_0,re_phi_1,im_phi_1");
    assert_eq!(lines.len(), 5);
    assert!(write_modes_csv(&path, &[0.0], &set).is_err());
}

// ---- checkpoint ----

#[test]
fn checkpoint_round_trip_and_corruption() {
    let rom = fit_dmdc(&random_snapshots(29, 6, 1, 20), 2, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_linear_rom(dir.path(), "dmdc", serde_json::json!({"r_x": 2, "r_xu": 4}), &rom).unwrap();
    let (m, back) = load_linear_rom(dir.path()).unwrap();
    assert_eq!(back, rom);
    assert_eq!(m.kind, "dmdc");
    let path = dir.path().join("a_r.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 1;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_linear_rom(dir.path()), Err(LinearRomError::Checkpoint(_))));
}

// ---- properties ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normal_equations_hold_for_any_full_rank_probe(seed in any::<u64>(), r in 1usize..6) {
        let snap = random_snapshots(seed, 8, 2, 40);
        let e = random_matrix(&mut rng(seed ^ 0x5eed), r, 8);
        let cf = closed_form_g(&snap, &e).unwrap();
        prop_assert!(cf.ridge.is_none());
        prop_assert!(cf.residual <= 1e-8, "residual {}", cf.residual);
    }

    #[test]
    fn pinv_form_equivalence_on_random_data(seed in any::<u64>()) {
        let snap = random_snapshots(seed, 8, 2, 40);
        let uy = truncated_svd(&snap.y, 3).unwrap().u;
        let cf = closed_form_g(&snap, &uy.transpose()).unwrap();
        prop_assert!(rel(&pinv_form_g(&snap, 3).unwrap(), &cf.g) <= 1e-9);
    }

    #[test]
    fn dmdc_encoder_orthonormal(seed in any::<u64>(), r_x in 1usize..4) {
        let snap = random_snapshots(seed, 8, 2, 30);
        let rom = fit_dmdc(&snap, r_x, r_x + 3).unwrap();
        prop_assert!((&rom.e.matmul_t(&rom.e) - &DenseMatrix::identity(r_x)).max_abs() <= 1e-10);
    }

    #[test]
    fn mode_matching_is_symmetric(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = dynamic_modes(&rom_with(random_matrix(&mut g, 4, 4), random_matrix(&mut g, 6, 4))).unwrap();
        let b = dynamic_modes(&rom_with(random_matrix(&mut g, 4, 4), random_matrix(&mut g, 6, 4))).unwrap();
        let ab = match_modes(&a, &b).unwrap();
        let ba = match_modes(&b, &a).unwrap();
        let mut swapped: Vec<(usize, usize, f64)> = ba.pairs.iter().map(|p| (p.b, p.a, p.score)).collect();
        swapped.sort_by_key(|t| t.0);
        let direct: Vec<(usize, usize, f64)> = ab.pairs.iter().map(|p| (p.a, p.b, p.score)).collect();
        prop_assert_eq!(direct, swapped);
    }
}

#[test]
fn prediction_loss_is_convex_along_random_directions() {
    let snap = random_snapshots(30, 8, 2, 40);
    let e = random_matrix(&mut rng(31), 3, 8);
    let g = closed_form_g(&snap, &e).unwrap().g;
    let l0 = pred_loss(&snap, &e, &g).unwrap();
    let mut r = rng(32);
    for _ in 0..100 {
        let dir = random_matrix(&mut r, 3, 5);
        let t = r.random_range(1e-3..1.0);
        let lp = pred_loss(&snap, &e, &(&g + &dir.scale(t))).unwrap();
        let lm = pred_loss(&snap, &e, &(&g - &dir.scale(t))).unwrap();
        assert!(lp - l0 >= -1e-12 && lm - l0 >= -1e-12);
        // midpoint convexity
        assert!(l0 <= 0.5 * (lp + lm) + 1e-12);
    }
}

#[test]
fn thin_qr_helper_is_orthonormal() {
    let q = thin_qr(&random_matrix(&mut rng(33), 7, 3)).0;
    assert!((&q.t_matmul(&q) - &DenseMatrix::identity(3)).max_abs() < 1e-13);
}

#[test]
fn larom_loss_matches_direct_evaluation() {
    let snap = near_low_rank(34, 10, 1, 3, 1e-2, 5, 12);
    let mut g = rng(35);
    let e = random_matrix(&mut g, 3, 10);
    let gm = random_matrix(&mut g, 3, 4);
    let cfg = LaromConfig { beta1: 0.7, beta4: 1.3, ..LaromConfig::default() };
    let recon = (&snap.y - &e.transpose().matmul(&e.matmul(&snap.y))).frobenius_norm().powi(2) / snap.n() as f64;
    let orth = (&e.matmul_t(&e) - &DenseMatrix::identity(3)).frobenius_norm().powi(2);
    let want = pred_loss(&snap, &e, &gm).unwrap() + 0.7 * recon + 1.3 * orth;
    let got = larom_loss(&snap, &e, &gm, &cfg).unwrap();
    assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
}

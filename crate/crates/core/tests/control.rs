use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use romlab::control::*;
use romlab::deeprom::{Architecture, DeepROM};
use romlab::linalg::{eig, DenseMatrix};
use romlab::linear_rom::{assemble_snapshots, default_rxu, fit_dmdc, LinearROM};
use romlab::pde::{generate_dataset, Grid, SimParams, SpatialField};

fn mini_rom(seed: u64) -> DeepROM {
    DeepROM::new(Architecture { nodes: 8, r_x: 2, d_u: 1, channels: 3, fc_width: 5, mlp_width: 6, dt: 0.01 }, seed).unwrap()
}

fn mini_ctrl(seed: u64) -> DeepROC {
    let arch = ControllerArch { mlp_width: 7, ..ControllerArch::new(2, 1, 0.2, 0.5) };
    DeepROC::new(arch, vec![0.3, -0.1], seed).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn lyapunov_values_and_gradient() {
    let k = DenseMatrix::identity(2).scale(0.5);
    assert_eq!(lyapunov(&k, &[0.0, 0.0]), (0.0, vec![0.0, 0.0]));
    assert_eq!(lyapunov(&k, &[1.0, 1.0]), (1.0, vec![1.0, 1.0]));
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let a = DenseMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0));
    let k = &a.t_matmul(&a) + &DenseMatrix::identity(3);
    let x = vec![0.3, -1.2, 0.8];
    let (_, grad) = lyapunov(&k, &x);
    let h = 1e-6;
    for i in 0..3 {
        let (mut up, mut dn) = (x.clone(), x.clone());
        up[i] += h;
        dn[i] -= h;
        let fd = (lyapunov(&k, &up).0 - lyapunov(&k, &dn).0) / (2.0 * h);
        assert!((fd - grad[i]).abs() <= 1e-8, "component {i}: {fd} vs {}", grad[i]);
    }
}

#[test]
fn stability_certificate_holds_on_random_probes() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut active = 0;
    for probe in 0..1000 {
        let r_x = 2 + probe % 4;
        let mut ctrl = DeepROC::new(ControllerArch { mlp_width: 16, ..ControllerArch::new(r_x, 1, 0.2, 0.5) }, vec![0.0; r_x], probe as u64 % 50).unwrap();
        // random P parameters over two decades of scale
        let scale = 10f64.powi(r.random_range(-1..2));
        let flat: Vec<f64> = (0..ctrl.params.num_scalars()).map(|_| scale * r.random_range(-1.0..1.0)).collect();
        ctrl.params.set_flat(&flat);
        let x: Vec<f64> = (0..r_x).map(|_| r.random_range(-3.0..3.0)).collect();
        let fs = ctrl.target_rhs(&x).unwrap();
        let k = ctrl.arch.k_matrix().unwrap();
        let (v, grad) = lyapunov(&k, &x);
        let cert = dot(&grad, &fs) + 0.2 * v;
        assert!(cert <= 1e-9, "probe {probe}: {cert}");
        let p = ctrl.p(&x).unwrap();
        if dot(&grad, &p) + 0.2 * v > 0.0 {
            active += 1;
        }
    }
    assert!(active > 100, "constraint active on only {active} probes");
}

#[test]
fn target_field_vanishes_at_origin_and_below_guard() {
    let ctrl = mini_ctrl(0);
    assert_eq!(ctrl.target_rhs(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    // ‖∇V‖² = ‖x‖² here, under 1e-12
    assert_eq!(ctrl.target_rhs(&[5e-7, -5e-7]).unwrap(), vec![0.0, 0.0]);
    assert!(ctrl.target_rhs(&[1e-3, 0.0]).unwrap().iter().any(|&v| v != 0.0));
}

#[test]
fn inactive_constraint_leaves_p_unchanged() {
    let mut ctrl = mini_ctrl(0);
    ctrl.params.zero_all();
    let names: Vec<String> = ctrl.params.names().to_vec();
    let i = names.iter().position(|n| n == "p_net.2.bias").unwrap();
    ctrl.params.tensors_mut()[i].data_mut().copy_from_slice(&[0.6, 0.8]);
    // x = −0.1 b/|b|: ∇V·P + αV = −0.1 + 0.001 < 0
    let x = [-0.06, -0.08];
    assert_eq!(ctrl.p(&x).unwrap(), vec![0.6, 0.8]);
    assert_eq!(ctrl.target_rhs(&x).unwrap(), vec![0.6, 0.8]);
    // the opposite side is projected
    let fs = ctrl.target_rhs(&[0.06, 0.08]).unwrap();
    assert!((dot(&[0.06, 0.08], &fs) + 0.2 * 0.5 * 0.01).abs() <= 1e-15);
}

#[test]
fn control_loss_gradient_matches_finite_differences_and_rom_is_frozen() {
    let rom = mini_rom(3);
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let latents: Vec<Vec<f64>> = (0..6).map(|_| vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]).collect();
    for seed in 0..3 {
        let ctrl = mini_ctrl(seed);
        let l = control_loss(&rom, &ctrl, &latents, 0.2, true).unwrap();
        assert!(l.rom_frozen);
        assert!((l.total - (l.matching + 0.2 * l.effort)).abs() <= 1e-15 * l.total.max(1.0));
        let analytic: Vec<f64> = l.grads.unwrap().iter().flat_map(|t| t.data().to_vec()).collect();
        let base = ctrl.params.flat();
        let mut probe = ctrl.clone();
        let h = 1e-6;
        let mut num = 0.0;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            probe.params.set_flat(&p);
            let up = control_loss(&rom, &probe, &latents, 0.2, false).unwrap().total;
            p[i] -= 2.0 * h;
            probe.params.set_flat(&p);
            let dn = control_loss(&rom, &probe, &latents, 0.2, false).unwrap().total;
            num += ((up - dn) / (2.0 * h) - analytic[i]).powi(2);
        }
        let err = num.sqrt() / analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err <= 1e-5, "seed {seed}: relative gradient error {err}");
    }
}

fn mini_dataset() -> romlab::pde::TrajectoryDataset {
    let grid = Grid { nodes: 8, ..Grid::default() };
    generate_dataset(10, 10, 5, 0, &SimParams::default(), &grid).unwrap()
}

fn mean_effort(rom: &DeepROM, ctrl: &DeepROC, ds: &romlab::pde::TrajectoryDataset) -> f64 {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let z = latent_states(rom, ctrl, ds, &idx).unwrap();
    z.iter().map(|x| ctrl.policy(x).unwrap()[0].powi(2)).sum::<f64>() / z.len() as f64
}

#[test]
fn effort_penalty_shrinks_policy_and_training_reduces_loss() {
    let rom = mini_rom(4);
    let ds = mini_dataset();
    let mut efforts = Vec::new();
    for beta3 in [0.2, 2.0, 20.0] {
        let cfg = ControlConfig { epochs: 40, batch: 16, lr: 3e-3, beta3, ..ControlConfig::default() };
        let (ctrl, report) = train_controller(&rom, &ds, &cfg).unwrap();
        efforts.push(mean_effort(&rom, &ctrl, &ds));
        if beta3 == 0.2 {
            let init = DeepROC::for_rom(&rom, cfg.alpha, cfg.k_scale, cfg.seed).unwrap();
            let z = latent_states(&rom, &init, &ds, &report.train_sequences).unwrap();
            let before = control_loss(&rom, &init, &z, beta3, false).unwrap().total;
            let after = control_loss(&rom, &ctrl, &z, beta3, false).unwrap().total;
            assert!(after < before, "loss {before} -> {after}");
        }
    }
    assert!(efforts[0] > efforts[1] && efforts[1] > efforts[2], "policy effort {efforts:?}");
}

#[test]
fn act_composes_encoder_shift_and_policy() {
    let rom = mini_rom(5);
    let ctrl = DeepROC::for_rom(&rom, 0.2, 0.5, 1).unwrap();
    assert_eq!(ctrl.z_star, rom.encode(&[0.0; 8]).unwrap());
    let x = [0.5, 1.0, -0.3, 0.2, 0.0, 1.1, 0.7, -0.4];
    let z = rom.encode(&x).unwrap();
    let shifted: Vec<f64> = z.iter().zip(&ctrl.z_star).map(|(a, b)| a - b).collect();
    let u = ctrl.act(&rom, &x).unwrap();
    assert_eq!(u, ctrl.policy(&shifted).unwrap());
    assert_eq!(u, ctrl.act(&rom, &x).unwrap());
    let pol = DeepRocPolicy { rom: &rom, controller: &ctrl };
    assert_eq!(pol.act(&x).unwrap(), u);
}

#[test]
fn controller_checkpoint_round_trip() {
    let ctrl = mini_ctrl(6);
    let dir = tempfile::tempdir().unwrap();
    ctrl.save(dir.path(), 6).unwrap();
    let (back, seed) = DeepROC::load(dir.path()).unwrap();
    assert_eq!(seed, 6);
    assert_eq!(back.params, ctrl.params);
    assert_eq!(back.z_star, ctrl.z_star);
    assert_eq!(back.target_rhs(&[0.4, -0.7]).unwrap(), ctrl.target_rhs(&[0.4, -0.7]).unwrap());
}

#[test]
fn invalid_controller_settings_rejected() {
    let bad_k = ControllerArch { k: vec![1.0, 0.0, 0.0, -1.0], ..ControllerArch::new(2, 1, 0.2, 0.5) };
    assert!(DeepROC::new(bad_k, vec![0.0; 2], 0).is_err());
    let asym = ControllerArch { k: vec![1.0, 0.1, 0.0, 1.0], ..ControllerArch::new(2, 1, 0.2, 0.5) };
    assert!(DeepROC::new(asym, vec![0.0; 2], 0).is_err());
    assert!(DeepROC::new(ControllerArch::new(2, 1, 0.0, 0.5), vec![0.0; 2], 0).is_err());
    assert!(DeepROC::new(ControllerArch::new(2, 1, 0.2, 0.5), vec![0.0; 3], 0).is_err());
    assert!(ControlConfig { beta3: -1.0, ..ControlConfig::default() }.validate().is_err());
}

fn scalar_rom(a: f64, b: f64) -> LinearROM {
    let one = DenseMatrix::from_rows(&[&[1.0]]);
    LinearROM::new(one.clone(), one, DenseMatrix::from_rows(&[&[a]]), DenseMatrix::from_rows(&[&[b]])).unwrap()
}

#[test]
fn lqr_degenerate_and_scalar_cases() {
    let rom = LinearROM::new(
        DenseMatrix::identity(2),
        DenseMatrix::identity(2),
        DenseMatrix::from_rows(&[&[0.5, 0.1], &[0.0, 0.3]]),
        DenseMatrix::zeros(2, 1),
    )
    .unwrap();
    let c = lqr_fit(&rom, 1.0, 1.0).unwrap();
    assert!(c.gain.as_slice().iter().all(|&g| g == 0.0));

    // p² − a²p − 1 = 0 for q = r = b = 1
    let a: f64 = 1.1;
    let p = (a * a + (a.powi(4) + 4.0).sqrt()) / 2.0;
    let want = a * p / (1.0 + p);
    let c = lqr_fit(&scalar_rom(a, 1.0), 1.0, 1.0).unwrap();
    assert!((c.gain[(0, 0)] - want).abs() <= 1e-10, "{} vs {want}", c.gain[(0, 0)]);
    assert_eq!(c.act(&[2.0]).unwrap(), vec![-2.0 * c.gain[(0, 0)]]);

    assert!(lqr_fit(&scalar_rom(1.1, 0.0), 1.0, 1.0).is_err());
    assert!(lqr_fit(&scalar_rom(0.5, 1.0), 0.0, 1.0).is_err());
}

#[test]
fn lqr_on_nws_dmdc_is_stable() {
    let ds = generate_dataset(100, 50, 0, 0, &SimParams::default(), &Grid::default()).unwrap();
    let snap = assemble_snapshots(&ds).unwrap();
    let rom = fit_dmdc(&snap, 2, default_rxu(&snap, 2).unwrap()).unwrap();
    let c = lqr_fit(&rom, 1.0, 1.0).unwrap();
    let ev = eig(&c.closed_loop_matrix()).unwrap();
    assert!(ev.spectral_radius() < 1.0);
    assert!(ev.spectral_radius() < eig(&rom.a_r).unwrap().spectral_radius());
}

#[test]
fn uncontrolled_runs() {
    let (p, g) = (SimParams::default(), Grid::default());
    let zero = closed_loop_sim(&ZeroPolicy { d_u: 1 }, &SpatialField::constant(&g, 0.0), 1.0, &p, &g).unwrap();
    assert_eq!(zero.mse_trace.len(), 101);
    assert!(zero.mse_trace.iter().all(|&m| m == 0.0));
    assert_eq!(zero.actuation_cumulative, 0.0);

    let r = closed_loop_sim(&ZeroPolicy { d_u: 1 }, &initial_state(&g), 5.0, &p, &g).unwrap();
    assert_eq!(r.states.len(), 501);
    assert_eq!(r.actuations.len(), 500);
    // settles near the stable +1 state instead of 0
    assert!(r.final_mse() > 0.5, "final MSE {}", r.final_mse());
    let last = r.states.last().unwrap();
    assert!(last.iter().all(|&v| (v - 1.0).abs() < 0.1));
}

struct Constant(f64);

impl Policy for Constant {
    fn name(&self) -> &str {
        "constant"
    }

    fn act(&self, _x: &[f64]) -> Result<Vec<f64>, ControlError> {
        Ok(vec![self.0])
    }
}

#[test]
fn metrics_and_exports_are_consistent() {
    let (p, g) = (SimParams::default(), Grid::default());
    let r = closed_loop_sim(&Constant(-1.5), &initial_state(&g), 0.2, &p, &g).unwrap();
    let mut acc = 0.0;
    for u in &r.actuations {
        acc += u.abs() * r.dt;
    }
    assert_eq!(acc, r.actuation_cumulative);
    assert_eq!(*r.cumulative_trace().last().unwrap(), r.actuation_cumulative);
    for (m, s) in r.mse_trace.iter().zip(&r.states) {
        assert_eq!(*m, s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64);
    }
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    write_closed_loop_csv(&csv, &r).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,mse,u,cumulative_actuation");
    assert_eq!(lines.len(), 22);
    assert_eq!(lines[21].split(',').nth(2), Some(""));
    write_state_history(dir.path(), "states", &r).unwrap();
    assert_eq!(std::fs::metadata(dir.path().join("states.bin")).unwrap().len(), 21 * 256 * 8);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("states.json")).unwrap()).unwrap();
    assert_eq!(meta["shape"], serde_json::json!([21, 256]));
}

struct Broken;

impl Policy for Broken {
    fn name(&self) -> &str {
        "broken"
    }

    fn act(&self, _x: &[f64]) -> Result<Vec<f64>, ControlError> {
        Ok(vec![f64::NAN])
    }
}

#[test]
fn non_finite_actuation_is_an_error() {
    let (p, g) = (SimParams::default(), Grid::default());
    assert!(matches!(
        closed_loop_sim(&Broken, &initial_state(&g), 0.1, &p, &g),
        Err(ControlError::NonFiniteActuation { step: 0 })
    ));
}

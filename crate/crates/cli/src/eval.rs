use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use romlab::control::{
    closed_loop_sim, initial_state, write_closed_loop_csv, write_state_history, ClosedLoopResult, DeepRocPolicy, Policy,
    ZeroPolicy,
};
use romlab::deeprom::DeepROM;
use romlab::io::write_json;
use romlab::linear_rom::{dynamic_modes, load_linear_rom, match_modes, write_modes_csv, LinearROM};
use romlab::pde::{load_dataset, TrajectoryDataset};

use crate::config::{check_schema, resolve, with_seed, ControllerKind, EvalCtrlConfig, EvalPredConfig, ModelKind, ModesConfig};
use crate::train::{load_deeproc, load_lqr, mode_grid};
use crate::{prepare_out, Overrides};

/// Recursive open-loop prediction from each initial state under the recorded
/// actuations. Returns `steps + 1` states per sequence; a shorter rollout
/// means the model blew up and the missing steps count as infinite error.
pub trait Predictor {
    fn rollouts(&self, x0: &[Vec<f64>], actuations: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<Vec<f64>>>>;
}

impl Predictor for LinearROM {
    fn rollouts(&self, x0: &[Vec<f64>], actuations: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<Vec<f64>>>> {
        x0.iter().zip(actuations).map(|(x, u)| Ok(self.rollout(x, u)?)).collect()
    }
}

impl Predictor for DeepROM {
    fn rollouts(&self, x0: &[Vec<f64>], actuations: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<Vec<f64>>>> {
        Ok(self.rollout_batch(x0, actuations)?.into_iter().map(|r| r.states).collect())
    }
}

/// `NMSE(k) = Σ_seq ‖x̂_k − x_k‖² / Σ_seq ‖x_k‖²` for `k = 0..=horizon`.
pub fn nmse_curve(pred: &dyn Predictor, test: &TrajectoryDataset, horizon: usize) -> Result<Vec<f64>> {
    if horizon > test.steps {
        bail!("horizon {horizon} exceeds the {} recorded steps", test.steps);
    }
    let x0: Vec<Vec<f64>> = test.sequences.iter().map(|s| s.states[0].clone()).collect();
    let acts: Vec<Vec<Vec<f64>>> =
        test.sequences.iter().map(|s| s.actuations[..horizon].iter().map(|&w| vec![w]).collect()).collect();
    let preds = pred.rollouts(&x0, &acts)?;
    if preds.len() != test.len() {
        bail!("predictor returned {} rollouts for {} sequences", preds.len(), test.len());
    }
    let mut err = vec![0.0; horizon + 1];
    let mut energy = vec![0.0; horizon + 1];
    for (seq, p) in test.sequences.iter().zip(&preds) {
        for k in 0..=horizon {
            let truth = &seq.states[k];
            energy[k] += truth.iter().map(|v| v * v).sum::<f64>();
            err[k] += match p.get(k) {
                Some(xh) if xh.len() == truth.len() => xh.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum(),
                Some(xh) => bail!("predicted state of length {} for {} nodes", xh.len(), truth.len()),
                None => f64::INFINITY,
            };
        }
    }
    Ok(err.iter().zip(&energy).map(|(&e, &n)| if e == 0.0 { 0.0 } else { e / n }).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NmseRow {
    pub method: String,
    pub seed: u64,
    pub step: usize,
    pub t: f64,
    pub nmse: f64,
}

pub fn write_nmse_csv(path: &Path, rows: &[NmseRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "method,seed,step,t,nmse")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{:e}", r.method, r.seed, r.step, r.t, r.nmse)?;
    }
    f.flush()?;
    Ok(())
}

fn load_predictor(kind: ModelKind, dir: &Path) -> Result<Box<dyn Predictor>> {
    let ctx = || format!("loading {} checkpoint {}", kind.name(), dir.display());
    Ok(match kind {
        ModelKind::Dmdc | ModelKind::Larom => {
            let (m, rom) = load_linear_rom(dir).with_context(ctx)?;
            if m.kind != kind.name() {
                bail!("{} holds a {:?} model, expected {}", dir.display(), m.kind, kind.name());
            }
            Box::new(rom)
        }
        ModelKind::Deeprom => Box::new(DeepROM::load(dir).with_context(ctx)?.0),
    })
}

#[derive(Serialize)]
struct PredSummary {
    method: String,
    seed: u64,
    final_nmse: f64,
}

#[derive(Serialize)]
struct PredReport {
    horizon: usize,
    test_sequences: usize,
    results: Vec<PredSummary>,
}

/// Per-horizon NMSE of every configured method and seed on the test set.
pub fn cmd_eval_pred(mut cfg: EvalPredConfig, ov: &Overrides) -> Result<PathBuf> {
    check_schema(cfg.schema_version)?;
    if let Some(s) = ov.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &ov.out {
        cfg.out = o.clone();
    }
    let test = load_dataset(&resolve(&cfg.test_data)).with_context(|| format!("loading test data {}", cfg.test_data.display()))?;
    // every checkpoint must exist before anything is written
    let mut models = Vec::new();
    for m in &cfg.methods {
        for &seed in &cfg.seeds {
            models.push((m.label.clone(), seed, load_predictor(m.kind, &resolve(&with_seed(&m.checkpoint, seed)))?));
        }
    }
    let dir = prepare_out(&cfg.out, &cfg)?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (label, seed, model) in &models {
        let curve = nmse_curve(model.as_ref(), &test, cfg.horizon)?;
        log::info!("{label} seed {seed}: NMSE at step {} = {:e}", cfg.horizon, curve[cfg.horizon]);
        results.push(PredSummary { method: label.clone(), seed: *seed, final_nmse: curve[cfg.horizon] });
        for (k, &v) in curve.iter().enumerate() {
            rows.push(NmseRow { method: label.clone(), seed: *seed, step: k, t: k as f64 * test.params.dt, nmse: v });
        }
    }
    write_nmse_csv(&dir.join("metrics.csv"), &rows)?;
    write_json(&dir.join("report.json"), &PredReport { horizon: cfg.horizon, test_sequences: test.len(), results })?;
    Ok(dir)
}

#[derive(Serialize)]
struct CtrlSummary {
    method: String,
    seed: Option<u64>,
    final_mse: f64,
    actuation_cumulative: f64,
    max_abs_actuation: f64,
}

enum Loaded {
    Deeproc(DeepROM, romlab::control::DeepROC),
    Lqr(romlab::control::LqrController),
}

/// Closed-loop runs of every configured controller and seed (plus the
/// uncontrolled system) from `2 + cos(2πζ) cos(πζ)`.
pub fn cmd_eval_ctrl(mut cfg: EvalCtrlConfig, ov: &Overrides) -> Result<PathBuf> {
    check_schema(cfg.schema_version)?;
    if let Some(s) = ov.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &ov.out {
        cfg.out = o.clone();
    }
    cfg.grid.validate()?;
    cfg.sim.validate()?;
    let mut loaded = Vec::new();
    for c in &cfg.controllers {
        for &seed in &cfg.seeds {
            let path = resolve(&with_seed(&c.checkpoint, seed));
            let l = match c.kind {
                ControllerKind::Deeproc => {
                    let (rom, ctrl) = load_deeproc(&path)?;
                    Loaded::Deeproc(rom, ctrl)
                }
                ControllerKind::Lqr => Loaded::Lqr(load_lqr(&path)?),
            };
            loaded.push((c.label.clone(), Some(seed), l));
        }
    }
    let dir = prepare_out(&cfg.out, &cfg)?;
    let x0 = initial_state(&cfg.grid);
    let mut runs: Vec<(String, Option<u64>, ClosedLoopResult)> = Vec::new();
    if cfg.uncontrolled {
        let r = closed_loop_sim(&ZeroPolicy { d_u: 1 }, &x0, cfg.horizon, &cfg.sim, &cfg.grid)?;
        runs.push(("uncontrolled".into(), None, r));
    }
    for (label, seed, l) in &loaded {
        let r = match l {
            Loaded::Deeproc(rom, ctrl) => {
                let p = DeepRocPolicy { rom, controller: ctrl };
                closed_loop_sim(&p as &dyn Policy, &x0, cfg.horizon, &cfg.sim, &cfg.grid)
            }
            Loaded::Lqr(c) => closed_loop_sim(c, &x0, cfg.horizon, &cfg.sim, &cfg.grid),
        }
        .with_context(|| format!("closed loop for {label}"))?;
        runs.push((label.clone(), *seed, r));
    }
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
    writeln!(f, "method,seed,step,t,mse,u,cumulative_actuation")?;
    let mut summary = Vec::new();
    for (label, seed, r) in &runs {
        let stem = match seed {
            Some(s) => format!("{label}_s{s}"),
            None => label.clone(),
        };
        write_closed_loop_csv(&dir.join(format!("{stem}.csv")), r)?;
        write_state_history(&dir.join("states"), &stem, r)?;
        let seed_col = seed.map_or(String::new(), |s| s.to_string());
        for (k, (m, c)) in r.mse_trace.iter().zip(r.cumulative_trace()).enumerate() {
            let u = r.actuations.get(k).map_or(String::new(), |u| format!("{u:e}"));
            writeln!(f, "{label},{seed_col},{k},{},{m:e},{u},{c:e}", k as f64 * r.dt)?;
        }
        let max_abs_actuation = r.actuations.iter().fold(0.0_f64, |m, u| m.max(u.abs()));
        log::info!(
            "{stem}: final MSE {:e}, cumulative actuation {:.4}, max |u| {max_abs_actuation:.3}",
            r.final_mse(),
            r.actuation_cumulative
        );
        summary.push(CtrlSummary {
            method: label.clone(),
            seed: *seed,
            final_mse: r.final_mse(),
            actuation_cumulative: r.actuation_cumulative,
            max_abs_actuation,
        });
    }
    f.flush()?;
    write_json(&dir.join("report.json"), &summary)?;
    Ok(dir)
}

#[derive(Serialize)]
struct PairOut {
    a: usize,
    b: usize,
    eigenvalue_a: [f64; 2],
    eigenvalue_b: [f64; 2],
    eigenvalue_gap: f64,
    score: f64,
}

#[derive(Serialize)]
struct ModesReport {
    a: PathBuf,
    b: PathBuf,
    kind_a: String,
    kind_b: String,
    mean_score: f64,
    pairs: Vec<PairOut>,
}

/// Dynamic modes of two linear checkpoints, paired by eigenvalue.
pub fn cmd_modes(mut cfg: ModesConfig, ov: &Overrides) -> Result<PathBuf> {
    check_schema(cfg.schema_version)?;
    if ov.seed.is_some() {
        bail!("modes takes no seed; name the checkpoints in the config");
    }
    if let Some(o) = &ov.out {
        cfg.out = o.clone();
    }
    let (ma, ra) = load_linear_rom(&resolve(&cfg.a)).with_context(|| format!("loading {}", cfg.a.display()))?;
    let (mb, rb) = load_linear_rom(&resolve(&cfg.b)).with_context(|| format!("loading {}", cfg.b.display()))?;
    if ra.r_x() != rb.r_x() || ra.d_x() != rb.d_x() {
        bail!("dimension mismatch: (r_x, d_x) = ({}, {}) vs ({}, {})", ra.r_x(), ra.d_x(), rb.r_x(), rb.d_x());
    }
    let (sa, sb) = (dynamic_modes(&ra)?, dynamic_modes(&rb)?);
    let report = match_modes(&sa, &sb)?;
    let dir = prepare_out(&cfg.out, &cfg)?;
    let zeta = mode_grid(ra.d_x()).coords();
    write_modes_csv(&dir.join("modes_a.csv"), &zeta, &sa)?;
    write_modes_csv(&dir.join("modes_b.csv"), &zeta, &sb)?;
    let pairs = report
        .pairs
        .iter()
        .map(|p| PairOut {
            a: p.a,
            b: p.b,
            eigenvalue_a: [sa.eigenvalues[p.a].re, sa.eigenvalues[p.a].im],
            eigenvalue_b: [sb.eigenvalues[p.b].re, sb.eigenvalues[p.b].im],
            eigenvalue_gap: p.eigenvalue_gap,
            score: p.score,
        })
        .collect();
    log::info!("mean mode alignment {:.4}", report.mean_score);
    let out = ModesReport { a: cfg.a.clone(), b: cfg.b.clone(), kind_a: ma.kind, kind_b: mb.kind, mean_score: report.mean_score, pairs };
    write_json(&dir.join("match_report.json"), &out)?;
    Ok(dir)
}

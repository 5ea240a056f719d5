//! Randomized training/test trajectories and their on-disk format.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::solver::{Grid, SimParams, SpatialField, Stepper};
use super::PdeError;
use crate::io::{bytes_to_f64s, sha256_hex, write_f64s, write_json};

pub const DATASET_FORMAT: &str = "romlab-dataset-v1";
/// Test sets draw from streams offset by this much, disjoint from training.
pub const TEST_STREAM_OFFSET: u64 = 1 << 32;
pub const CHEBYSHEV_TERMS: usize = 5;

/// The random numbers behind one sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceDraws {
    pub a: f64,
    pub b: [f64; CHEBYSHEV_TERMS],
    pub g: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    /// `steps + 1` states.
    pub states: Vec<Vec<f64>>,
    /// `steps` actuations; `actuations[i]` drives `states[i] -> states[i + 1]`.
    pub actuations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub grid: Grid,
    pub params: SimParams,
    pub seed: u64,
    pub stream_offset: u64,
    pub steps: usize,
    pub sequences: Vec<Sequence>,
    pub draws: Vec<SequenceDraws>,
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Keeps the listed sequences, in the given order.
    pub fn subset(&self, indices: &[usize]) -> TrajectoryDataset {
        TrajectoryDataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            draws: indices.iter().filter_map(|&i| self.draws.get(i).cloned()).collect(),
            ..self.clone()
        }
    }
}

/// `T_0..T_{K-1}` at `z` by the three-term recurrence.
pub fn chebyshev_values(z: f64) -> [f64; CHEBYSHEV_TERMS] {
    let mut t = [0.0; CHEBYSHEV_TERMS];
    t[0] = 1.0;
    t[1] = z;
    for k in 1..CHEBYSHEV_TERMS - 1 {
        t[k + 1] = 2.0 * z * t[k] - t[k - 1];
    }
    t
}

/// `|a| Σ b_k T_k(ζ)` at the grid nodes.
pub fn chebyshev_field(grid: &Grid, a: f64, b: &[f64; CHEBYSHEV_TERMS]) -> SpatialField {
    SpatialField::from_fn(grid, |z| a.abs() * chebyshev_values(z).iter().zip(b).map(|(t, c)| t * c).sum::<f64>())
}

/// Draws `a ~ N(0,1)` then `b_0..b_4 ~ U(−1,1)`.
pub fn chebyshev_ic(rng: &mut impl Rng, grid: &Grid) -> (SpatialField, f64, [f64; CHEBYSHEV_TERMS]) {
    let a = Normal::new(0.0, 1.0).unwrap().sample(rng);
    let mut b = [0.0; CHEBYSHEV_TERMS];
    for v in &mut b {
        *v = rng.random_range(-1.0..1.0);
    }
    (chebyshev_field(grid, a, &b), a, b)
}

/// The per-sequence generator: `seed` with stream `stream_offset + index`.
pub fn sequence_rng(seed: u64, stream_offset: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_offset + index as u64);
    rng
}

pub fn draw_sequence(rng: &mut impl Rng, steps: usize) -> SequenceDraws {
    let a = Normal::new(0.0, 1.0).unwrap().sample(rng);
    let mut b = [0.0; CHEBYSHEV_TERMS];
    for v in &mut b {
        *v = rng.random_range(-1.0..1.0);
    }
    let g = (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect();
    SequenceDraws { a, b, g }
}

/// Simulates one sequence. `w_0 = 10 g_0 max|q(t_0)|` and
/// `w_i = 10 g_i max|q(t_{i−1})|` for `i ≥ 1`.
pub fn simulate_draws(draws: &SequenceDraws, stepper: &Stepper, grid: &Grid) -> Result<Sequence, PdeError> {
    let mut states = Vec::with_capacity(draws.g.len() + 1);
    let mut actuations = Vec::with_capacity(draws.g.len());
    let mut field = chebyshev_field(grid, draws.a, &draws.b);
    states.push(field.values.clone());
    for (i, &g) in draws.g.iter().enumerate() {
        let lagged = &states[i.saturating_sub(1)];
        let amp = lagged.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let w = 10.0 * g * amp;
        field = stepper.step(&field, w)?;
        actuations.push(w);
        states.push(field.values.clone());
    }
    Ok(Sequence { states, actuations })
}

pub fn generate_dataset(
    count: usize,
    steps: usize,
    seed: u64,
    stream_offset: u64,
    params: &SimParams,
    grid: &Grid,
) -> Result<TrajectoryDataset, PdeError> {
    let stepper = Stepper::new(params, grid)?;
    let mut sequences = Vec::with_capacity(count);
    let mut all_draws = Vec::with_capacity(count);
    for i in 0..count {
        let draws = draw_sequence(&mut sequence_rng(seed, stream_offset, i), steps);
        sequences.push(simulate_draws(&draws, &stepper, grid)?);
        all_draws.push(draws);
    }
    Ok(TrajectoryDataset { grid: grid.clone(), params: params.clone(), seed, stream_offset, steps, sequences, draws: all_draws })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayEntry {
    pub file: String,
    pub shape: Vec<usize>,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub dtype: String,
    pub seed: u64,
    pub stream_offset: u64,
    pub rng: String,
    pub count: usize,
    pub steps: usize,
    pub grid: Grid,
    pub params: SimParams,
    pub states: ArrayEntry,
    pub actuations: ArrayEntry,
    pub draws: ArrayEntry,
}

pub fn save_dataset(ds: &TrajectoryDataset, dir: &Path) -> Result<DatasetManifest, PdeError> {
    fs::create_dir_all(dir)?;
    let nodes = ds.grid.nodes;
    let states: Vec<f64> = ds.sequences.iter().flat_map(|s| s.states.iter().flatten().copied()).collect();
    let actuations: Vec<f64> = ds.sequences.iter().flat_map(|s| s.actuations.iter().copied()).collect();
    let states_sha = write_f64s(&dir.join("states.bin"), &states)?;
    let act_sha = write_f64s(&dir.join("actuations.bin"), &actuations)?;
    let draws_text = serde_json::to_string_pretty(&ds.draws)? + "\n";
    fs::write(dir.join("draws.json"), &draws_text)?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        dtype: "float64-little-endian".into(),
        seed: ds.seed,
        stream_offset: ds.stream_offset,
        rng: "ChaCha8Rng::seed_from_u64(seed), stream = stream_offset + sequence index; draws a, b_0..b_4, g_0..g_{steps-1}".into(),
        count: ds.len(),
        steps: ds.steps,
        grid: ds.grid.clone(),
        params: ds.params.clone(),
        states: ArrayEntry { file: "states.bin".into(), shape: vec![ds.len(), ds.steps + 1, nodes], sha256: states_sha },
        actuations: ArrayEntry { file: "actuations.bin".into(), shape: vec![ds.len(), ds.steps], sha256: act_sha },
        draws: ArrayEntry { file: "draws.json".into(), shape: vec![ds.len()], sha256: sha256_hex(draws_text.as_bytes()) },
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn read_array(dir: &Path, name: &str, entry: &ArrayEntry) -> Result<Vec<f64>, PdeError> {
    let bytes = fs::read(dir.join(&entry.file))?;
    let want: usize = entry.shape.iter().product();
    if bytes.len() != want * 8 {
        return Err(PdeError::Shape {
            array: name.into(),
            msg: format!("manifest shape {:?} needs {} bytes, file has {}", entry.shape, want * 8, bytes.len()),
        });
    }
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(PdeError::Checksum { array: name.into() });
    }
    let values = bytes_to_f64s(&bytes).expect("length checked");
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PdeError::Shape { array: name.into(), msg: "non-finite entries".into() });
    }
    Ok(values)
}

pub fn load_dataset(dir: &Path) -> Result<TrajectoryDataset, PdeError> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| PdeError::Manifest(e.to_string()))?;
    if m.format != DATASET_FORMAT {
        return Err(PdeError::Manifest(format!("unknown format {:?}", m.format)));
    }
    m.grid.validate()?;
    let nodes = m.grid.nodes;
    if m.states.shape != [m.count, m.steps + 1, nodes] {
        return Err(PdeError::Shape {
            array: "states".into(),
            msg: format!("shape {:?} disagrees with count {}, steps {}, nodes {nodes}", m.states.shape, m.count, m.steps),
        });
    }
    if m.actuations.shape != [m.count, m.steps] {
        return Err(PdeError::Shape {
            array: "actuations".into(),
            msg: format!("shape {:?} disagrees with count {} and steps {}", m.actuations.shape, m.count, m.steps),
        });
    }
    let states = read_array(dir, "states", &m.states)?;
    let actuations = read_array(dir, "actuations", &m.actuations)?;
    let draws_text = fs::read_to_string(dir.join(&m.draws.file))?;
    if sha256_hex(draws_text.as_bytes()) != m.draws.sha256 {
        return Err(PdeError::Checksum { array: "draws".into() });
    }
    let draws: Vec<SequenceDraws> = serde_json::from_str(&draws_text).map_err(|e| PdeError::Manifest(e.to_string()))?;
    if draws.len() != m.count {
        return Err(PdeError::Shape { array: "draws".into(), msg: format!("{} entries for {} sequences", draws.len(), m.count) });
    }
    let per_seq = (m.steps + 1) * nodes;
    let sequences = (0..m.count)
        .map(|i| Sequence {
            states: states[i * per_seq..(i + 1) * per_seq].chunks(nodes).map(<[f64]>::to_vec).collect(),
            actuations: actuations[i * m.steps..(i + 1) * m.steps].to_vec(),
        })
        .collect();
    Ok(TrajectoryDataset {
        grid: m.grid,
        params: m.params,
        seed: m.seed,
        stream_offset: m.stream_offset,
        steps: m.steps,
        sequences,
        draws,
    })
}

/// One trajectory as CSV rows `t, ζ_0, ..., ζ_{N−1}`.
pub fn write_trajectory_csv(path: &Path, states: &[Vec<f64>], dt: f64) -> Result<(), PdeError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    let nodes = states.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("t".to_string()).chain((0..nodes).map(|j| format!("zeta_{j}"))).collect();
    writeln!(f, "{}", header.join(","))?;
    for (i, s) in states.iter().enumerate() {
        let row: Vec<String> = std::iter::once(format!("{}", i as f64 * dt)).chain(s.iter().map(|v| format!("{v:e}"))).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DeepRomError;
use crate::autodiff::{
    load_params, restore_into, rk4_step, save_params, AutodiffError, Binding, Conv1d, ConvTranspose1d, Graph, Linear,
    Mlp, MlpSpec, Params, Tensor, Var,
};

pub const DEEPROM_KIND: &str = "deeprom";

/// Layer sizes of the convolutional autoencoder and the latent vector field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub nodes: usize,
    pub r_x: usize,
    pub d_u: usize,
    pub channels: usize,
    pub fc_width: usize,
    pub mlp_width: usize,
    pub dt: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture { nodes: 256, r_x: 5, d_u: 1, channels: 32, fc_width: 64, mlp_width: 100, dt: 0.01 }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<(), DeepRomError> {
        let counts = [self.r_x, self.d_u, self.channels, self.fc_width, self.mlp_width];
        if self.nodes < 4 || self.nodes % 4 != 0 || counts.contains(&0) || !(self.dt > 0.0) {
            return Err(DeepRomError::Argument(format!("invalid architecture {self:?}")));
        }
        Ok(())
    }

    /// Length of the signal after both stride-2 convolutions.
    pub fn coarse_len(&self) -> usize {
        self.nodes / 4
    }

    pub fn flat_width(&self) -> usize {
        self.channels * self.coarse_len()
    }
}

#[derive(Clone, Debug)]
struct Encoder {
    conv1: Conv1d,
    conv2: Conv1d,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Clone, Debug)]
struct Decoder {
    fc2: Linear,
    fc1: Linear,
    conv2: ConvTranspose1d,
    conv1: ConvTranspose1d,
}

/// Convolutional autoencoder with a continuous-time latent vector field
/// `F(z, u) = F_auto(z) + F_forced(z, u) − F_forced(z, 0)`.
#[derive(Clone, Debug)]
pub struct DeepROM {
    pub arch: Architecture,
    pub params: Params,
    enc: Encoder,
    dec: Decoder,
    f_auto: Mlp,
    f_forced: Mlp,
}

/// A model's parameters placed on one graph.
pub struct Bound<'m> {
    pub model: &'m DeepROM,
    pub binding: Binding,
}

impl DeepROM {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self, DeepRomError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::new();
        let (c, fc, r) = (arch.channels, arch.fc_width, arch.r_x);
        let enc = Encoder {
            conv1: Conv1d::new(&mut p, "encoder.conv1", 1, c, 3, 2, 1, &mut rng),
            conv2: Conv1d::new(&mut p, "encoder.conv2", c, c, 3, 2, 1, &mut rng),
            fc1: Linear::new(&mut p, "encoder.fc1", arch.flat_width(), fc, true, &mut rng),
            fc2: Linear::new(&mut p, "encoder.fc2", fc, r, false, &mut rng),
        };
        let dec = Decoder {
            fc2: Linear::new(&mut p, "decoder.fc2", r, fc, true, &mut rng),
            fc1: Linear::new(&mut p, "decoder.fc1", fc, arch.flat_width(), true, &mut rng),
            conv2: ConvTranspose1d::new(&mut p, "decoder.conv2", c, c, 3, 2, 1, 1, &mut rng),
            conv1: ConvTranspose1d::new(&mut p, "decoder.conv1", c, 1, 3, 2, 1, 1, &mut rng),
        };
        let w = arch.mlp_width;
        let f_auto = Mlp::new(&mut p, "f_auto", MlpSpec::relu(&[r, w, w, r]), &mut rng)?;
        let f_forced = Mlp::new(&mut p, "f_forced", MlpSpec::relu(&[r + arch.d_u, w, w, r]), &mut rng)?;
        Ok(DeepROM { arch, params: p, enc, dec, f_auto, f_forced })
    }

    pub fn r_x(&self) -> usize {
        self.arch.r_x
    }

    pub fn d_u(&self) -> usize {
        self.arch.d_u
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound<'_> {
        Bound { model: self, binding: self.params.bind(g, trainable) }
    }

    /// One flag per parameter tensor: true for encoder/decoder tensors.
    pub fn autoencoder_mask(&self) -> Vec<bool> {
        self.params.names().iter().map(|n| n.starts_with("encoder.") || n.starts_with("decoder.")).collect()
    }

    fn check_rows(&self, rows: &[Vec<f64>], width: usize, what: &str) -> Result<(), DeepRomError> {
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(DeepRomError::Shape(format!("{what} has length {}, expected {width}", bad.len())));
        }
        Ok(())
    }

    pub fn encode_batch(&self, fields: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DeepRomError> {
        self.check_rows(fields, self.arch.nodes, "field")?;
        if fields.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let x = g.constant(rows_tensor(fields, self.arch.nodes)?);
        let z = b.encode(&mut g, x)?;
        Ok(tensor_rows(g.value(z)))
    }

    pub fn encode(&self, field: &[f64]) -> Result<Vec<f64>, DeepRomError> {
        Ok(self.encode_batch(&[field.to_vec()])?.remove(0))
    }

    pub fn decode_batch(&self, latents: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DeepRomError> {
        self.check_rows(latents, self.arch.r_x, "latent")?;
        if latents.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let z = g.constant(rows_tensor(latents, self.arch.r_x)?);
        let x = b.decode(&mut g, z)?;
        Ok(tensor_rows(g.value(x)))
    }

    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>, DeepRomError> {
        Ok(self.decode_batch(&[latent.to_vec()])?.remove(0))
    }

    pub fn latent_rhs(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>, DeepRomError> {
        self.check_rows(&[z.to_vec()], self.arch.r_x, "latent")?;
        self.check_rows(&[u.to_vec()], self.arch.d_u, "actuation")?;
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let zv = g.constant(Tensor::new(&[1, z.len()], z.to_vec())?);
        let uv = g.constant(Tensor::new(&[1, u.len()], u.to_vec())?);
        let f = b.latent_rhs(&mut g, zv, uv)?;
        Ok(g.value(f).data().to_vec())
    }

    pub fn f_auto(&self, z: &[f64]) -> Result<Vec<f64>, DeepRomError> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let zv = g.constant(Tensor::new(&[1, z.len()], z.to_vec())?);
        let f = self.f_auto.forward(&mut g, &b.binding, zv)?;
        Ok(g.value(f).data().to_vec())
    }

    pub fn f_forced(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>, DeepRomError> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let zu: Vec<f64> = z.iter().chain(u).copied().collect();
        let v = g.constant(Tensor::new(&[1, zu.len()], zu)?);
        let f = self.f_forced.forward(&mut g, &b.binding, v)?;
        Ok(g.value(f).data().to_vec())
    }

    /// One RK4 step of the latent field over `dt` with `u` held constant.
    pub fn predict_next_latent(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>, DeepRomError> {
        Ok(self.predict_next_latent_batch(&[z.to_vec()], &[u.to_vec()])?.remove(0))
    }

    pub fn predict_next_latent_batch(&self, z: &[Vec<f64>], u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DeepRomError> {
        self.check_rows(z, self.arch.r_x, "latent")?;
        self.check_rows(u, self.arch.d_u, "actuation")?;
        if z.len() != u.len() {
            return Err(DeepRomError::Shape(format!("{} latents but {} actuations", z.len(), u.len())));
        }
        if z.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let zv = g.constant(rows_tensor(z, self.arch.r_x)?);
        let uv = g.constant(rows_tensor(u, self.arch.d_u)?);
        let next = b.step(&mut g, zv, uv)?;
        Ok(tensor_rows(g.value(next)))
    }

    /// Encodes once, integrates the latent state recursively and decodes every
    /// step. Stops early, with `truncated` set, if the latent state blows up.
    pub fn rollout(&self, x0: &[f64], actuations: &[Vec<f64>]) -> Result<Rollout, DeepRomError> {
        let mut out = self.rollout_batch(&[x0.to_vec()], &[actuations.to_vec()])?;
        Ok(out.remove(0))
    }

    /// [`rollout`](Self::rollout) for many initial states at once. All
    /// sequences must have the same number of actuations.
    pub fn rollout_batch(&self, x0: &[Vec<f64>], actuations: &[Vec<Vec<f64>>]) -> Result<Vec<Rollout>, DeepRomError> {
        if x0.len() != actuations.len() {
            return Err(DeepRomError::Shape(format!("{} initial states but {} actuation sequences", x0.len(), actuations.len())));
        }
        let steps = actuations.first().map_or(0, Vec::len);
        if actuations.iter().any(|a| a.len() != steps) {
            return Err(DeepRomError::Shape("actuation sequences differ in length".into()));
        }
        let mut z = self.encode_batch(x0)?;
        let mut outs: Vec<Rollout> = self
            .decode_batch(&z)?
            .into_iter()
            .map(|s| Rollout { states: vec![s], truncated: false })
            .collect();
        for k in 0..steps {
            let live: Vec<usize> = (0..x0.len()).filter(|&i| !outs[i].truncated).collect();
            if live.is_empty() {
                break;
            }
            let zs: Vec<Vec<f64>> = live.iter().map(|&i| z[i].clone()).collect();
            let us: Vec<Vec<f64>> = live.iter().map(|&i| actuations[i][k].clone()).collect();
            let next = match self.predict_next_latent_batch(&zs, &us) {
                Ok(n) => n,
                Err(DeepRomError::Autodiff(AutodiffError::NonFinite(_))) => {
                    // isolate the offending sequences one by one
                    let mut n = Vec::with_capacity(live.len());
                    for (zi, ui) in zs.iter().zip(&us) {
                        n.push(self.predict_next_latent(zi, ui).unwrap_or_else(|_| vec![f64::NAN; zi.len()]));
                    }
                    n
                }
                Err(e) => return Err(e),
            };
            let finite: Vec<usize> = (0..live.len()).filter(|&j| next[j].iter().all(|v| v.is_finite())).collect();
            for (j, &i) in live.iter().enumerate() {
                if next[j].iter().any(|v| !v.is_finite()) {
                    log::warn!("rollout {i}: latent state became non-finite at step {}", k + 1);
                    outs[i].truncated = true;
                }
            }
            let good: Vec<Vec<f64>> = finite.iter().map(|&j| next[j].clone()).collect();
            let decoded = match self.decode_batch(&good) {
                Ok(d) => d.into_iter().map(Some).collect::<Vec<_>>(),
                Err(DeepRomError::Autodiff(AutodiffError::NonFinite(_))) => good.iter().map(|zz| self.decode(zz).ok()).collect(),
                Err(e) => return Err(e),
            };
            for (&j, d) in finite.iter().zip(decoded) {
                let i = live[j];
                match d {
                    Some(state) => {
                        z[i] = next[j].clone();
                        outs[i].states.push(state);
                    }
                    None => outs[i].truncated = true,
                }
            }
        }
        Ok(outs)
    }

    pub fn save(&self, dir: &Path, seed: u64) -> Result<(), DeepRomError> {
        save_params(dir, DEEPROM_KIND, seed, serde_json::to_value(&self.arch)?, &self.params)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<(Self, u64), DeepRomError> {
        let (manifest, loaded) = load_params(dir)?;
        if manifest.kind != DEEPROM_KIND {
            return Err(DeepRomError::Checkpoint(format!("expected a {DEEPROM_KIND} checkpoint, found {:?}", manifest.kind)));
        }
        let arch: Architecture = serde_json::from_value(manifest.hyperparameters)?;
        let mut model = DeepROM::new(arch, 0)?;
        restore_into(&mut model.params, &loaded)?;
        Ok((model, manifest.seed))
    }
}

/// Predicted states from one rollout; `states[0]` is the reconstruction of `x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub states: Vec<Vec<f64>>,
    pub truncated: bool,
}

impl Bound<'_> {
    /// `x: [batch, nodes]` to `[batch, r_x]`.
    pub fn encode(&self, g: &mut Graph, x: Var) -> Result<Var, AutodiffError> {
        let (m, a, p) = (&self.model.enc, &self.model.arch, &self.binding);
        let batch = g.value(x).shape()[0];
        let h = g.reshape(x, &[batch, 1, a.nodes])?;
        let h = m.conv1.forward(g, p, h)?;
        let h = g.relu(h)?;
        let h = m.conv2.forward(g, p, h)?;
        let h = g.reshape(h, &[batch, a.flat_width()])?;
        let h = m.fc1.forward(g, p, h)?;
        let h = g.relu(h)?;
        m.fc2.forward(g, p, h)
    }

    /// `z: [batch, r_x]` to `[batch, nodes]`.
    pub fn decode(&self, g: &mut Graph, z: Var) -> Result<Var, AutodiffError> {
        let (m, a, p) = (&self.model.dec, &self.model.arch, &self.binding);
        let batch = g.value(z).shape()[0];
        let h = m.fc2.forward(g, p, z)?;
        let h = g.relu(h)?;
        let h = m.fc1.forward(g, p, h)?;
        let h = g.reshape(h, &[batch, a.channels, a.coarse_len()])?;
        let h = m.conv2.forward(g, p, h)?;
        let h = g.relu(h)?;
        let h = m.conv1.forward(g, p, h)?;
        g.reshape(h, &[batch, a.nodes])
    }

    pub fn f_auto(&self, g: &mut Graph, z: Var) -> Result<Var, AutodiffError> {
        self.model.f_auto.forward(g, &self.binding, z)
    }

    pub fn f_forced(&self, g: &mut Graph, z: Var, u: Var) -> Result<Var, AutodiffError> {
        let zu = g.concat_cols(z, u)?;
        self.model.f_forced.forward(g, &self.binding, zu)
    }

    /// `F_auto(z) + (F_forced(z, u) − F_forced(z, 0))`; the bracket is exactly
    /// zero when `u = 0`.
    pub fn latent_rhs(&self, g: &mut Graph, z: Var, u: Var) -> Result<Var, AutodiffError> {
        let zero = g.constant(Tensor::zeros(g.value(u).shape()));
        let auto = self.f_auto(g, z)?;
        let forced = self.f_forced(g, z, u)?;
        let free = self.f_forced(g, z, zero)?;
        let delta = g.sub(forced, free)?;
        g.add(auto, delta)
    }

    pub fn step(&self, g: &mut Graph, z: Var, u: Var) -> Result<Var, AutodiffError> {
        rk4_step(g, |g, at| self.latent_rhs(g, at, u), z, self.model.arch.dt)
    }
}

pub(crate) fn rows_tensor(rows: &[Vec<f64>], width: usize) -> Result<Tensor, AutodiffError> {
    let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Tensor::new(&[rows.len(), width], data)
}

pub(crate) fn tensor_rows(t: &Tensor) -> Vec<Vec<f64>> {
    let w = t.shape().last().copied().unwrap_or(0);
    if w == 0 {
        return vec![Vec::new(); t.shape().first().copied().unwrap_or(0)];
    }
    t.data().chunks(w).map(<[f64]>::to_vec).collect()
}

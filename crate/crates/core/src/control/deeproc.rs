use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::closed_loop::Policy;
use super::ControlError;
use crate::autodiff::{load_params, restore_into, save_params, AutodiffError, Binding, Graph, Mlp, MlpSpec, Params, Tensor, Var};
use crate::deeprom::DeepROM;
use crate::linalg::{eig, DenseMatrix};

pub const DEEPROC_KIND: &str = "deeproc";
/// Below this `‖∇V‖²` the target field is defined as zero.
pub const GRAD_GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerArch {
    pub r_x: usize,
    pub d_u: usize,
    pub mlp_width: usize,
    pub alpha: f64,
    /// Row-major symmetric positive definite `r_x × r_x` Lyapunov matrix.
    pub k: Vec<f64>,
}

impl ControllerArch {
    /// `K = k_scale · I`.
    pub fn new(r_x: usize, d_u: usize, alpha: f64, k_scale: f64) -> Self {
        let k = DenseMatrix::identity(r_x).scale(k_scale).into_vec();
        ControllerArch { r_x, d_u, mlp_width: 100, alpha, k }
    }

    pub fn k_matrix(&self) -> Result<DenseMatrix, ControlError> {
        Ok(DenseMatrix::from_vec(self.r_x, self.r_x, self.k.clone())?)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if self.r_x == 0 || self.d_u == 0 || self.mlp_width == 0 || !(self.alpha > 0.0) {
            return Err(ControlError::Argument(format!("invalid controller architecture {self:?}")));
        }
        let k = self.k_matrix()?;
        if !k.is_symmetric(0.0) {
            return Err(ControlError::Argument("Lyapunov matrix K must be symmetric".into()));
        }
        let ev = eig(&k)?;
        if ev.values.iter().any(|l| !(l.re > 0.0)) {
            return Err(ControlError::Argument("Lyapunov matrix K must be positive definite".into()));
        }
        Ok(())
    }
}

/// `V(x) = xᵀ K x` and `∇V = 2 K x` for symmetric `K`.
pub fn lyapunov(k: &DenseMatrix, x: &[f64]) -> (f64, Vec<f64>) {
    let kx = k.matvec(x);
    let v = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
    (v, kx.iter().map(|g| 2.0 * g).collect())
}

/// The arbitrary field `P`, the policy `Π`, and the latent coordinates of the
/// desired state, `z* = E(0)`. Both networks act on the shifted latent `z − z*`.
#[derive(Clone, Debug)]
pub struct DeepROC {
    pub arch: ControllerArch,
    pub params: Params,
    pub z_star: Vec<f64>,
    p_net: Mlp,
    pi_net: Mlp,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Hyper {
    arch: ControllerArch,
    z_star: Vec<f64>,
}

impl DeepROC {
    pub fn new(arch: ControllerArch, z_star: Vec<f64>, seed: u64) -> Result<Self, ControlError> {
        arch.validate()?;
        if z_star.len() != arch.r_x {
            return Err(ControlError::Shape(format!("latent shift of length {} for r_x = {}", z_star.len(), arch.r_x)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        let (r, w) = (arch.r_x, arch.mlp_width);
        let p_net = Mlp::new(&mut params, "p_net", MlpSpec::relu(&[r, w, w, r]), &mut rng)?;
        let pi_net = Mlp::new(&mut params, "pi_net", MlpSpec::relu(&[r, w, w, arch.d_u]), &mut rng)?;
        Ok(DeepROC { arch, params, z_star, p_net, pi_net })
    }

    /// Controller for `rom`, shifted to its encoding of the zero field.
    pub fn for_rom(rom: &DeepROM, alpha: f64, k_scale: f64, seed: u64) -> Result<Self, ControlError> {
        let z_star = rom.encode(&vec![0.0; rom.arch.nodes])?;
        DeepROC::new(ControllerArch::new(rom.r_x(), rom.d_u(), alpha, k_scale), z_star, seed)
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Binding {
        self.params.bind(g, trainable)
    }

    pub fn p_forward(&self, g: &mut Graph, b: &Binding, x: Var) -> Result<Var, AutodiffError> {
        self.p_net.forward(g, b, x)
    }

    pub fn pi_forward(&self, g: &mut Graph, b: &Binding, x: Var) -> Result<Var, AutodiffError> {
        self.pi_net.forward(g, b, x)
    }

    /// `F_s(x) = P(x) − ReLU(∇V·P + αV)/‖∇V‖² ∇V` for `x: [batch, r_x]`,
    /// zero on rows with `‖∇V‖² < GRAD_GUARD`.
    pub fn target_rhs_var(&self, g: &mut Graph, b: &Binding, x: Var) -> Result<Var, AutodiffError> {
        let k = g.constant(Tensor::new(&[self.arch.r_x, self.arch.r_x], self.arch.k.clone())?);
        let p = self.p_forward(g, b, x)?;
        let kx = g.linear(x, k, None)?;
        let v = g.row_dot(x, kx)?;
        let grad = g.scale(kx, 2.0)?;
        let gp = g.row_dot(grad, p)?;
        let s = g.add_scaled(gp, v, self.arch.alpha)?;
        let s = g.relu(s)?;
        let nrm = g.row_dot(grad, grad)?;
        let coef = g.guarded_div(s, nrm, GRAD_GUARD)?;
        let corr = g.row_scale(grad, coef)?;
        let fs = g.sub(p, corr)?;
        let mask: Vec<f64> = g.value(nrm).data().iter().map(|&n| if n >= GRAD_GUARD { 1.0 } else { 0.0 }).collect();
        let mask = g.constant(Tensor::new(&[mask.len(), 1], mask)?);
        g.row_scale(fs, mask)
    }

    fn eval(&self, x: &[f64], f: impl Fn(&Self, &mut Graph, &Binding, Var) -> Result<Var, AutodiffError>) -> Result<Vec<f64>, ControlError> {
        if x.len() != self.arch.r_x {
            return Err(ControlError::Shape(format!("latent of length {} for r_x = {}", x.len(), self.arch.r_x)));
        }
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let xv = g.constant(Tensor::new(&[1, x.len()], x.to_vec())?);
        let out = f(self, &mut g, &b, xv)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Target latent velocity at a shifted latent state.
    pub fn target_rhs(&self, x: &[f64]) -> Result<Vec<f64>, ControlError> {
        self.eval(x, Self::target_rhs_var)
    }

    pub fn p(&self, x: &[f64]) -> Result<Vec<f64>, ControlError> {
        self.eval(x, Self::p_forward)
    }

    /// `Π` at a shifted latent state.
    pub fn policy(&self, x: &[f64]) -> Result<Vec<f64>, ControlError> {
        self.eval(x, Self::pi_forward)
    }

    pub fn shift(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.z_star).map(|(a, b)| a - b).collect()
    }

    /// `u = Π(E(x) − z*)`.
    pub fn act(&self, rom: &DeepROM, x: &[f64]) -> Result<Vec<f64>, ControlError> {
        self.policy(&self.shift(&rom.encode(x)?))
    }

    pub fn save(&self, dir: &Path, seed: u64) -> Result<(), ControlError> {
        let hyper = Hyper { arch: self.arch.clone(), z_star: self.z_star.clone() };
        save_params(dir, DEEPROC_KIND, seed, serde_json::to_value(hyper)?, &self.params)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<(Self, u64), ControlError> {
        let (manifest, loaded) = load_params(dir)?;
        if manifest.kind != DEEPROC_KIND {
            return Err(ControlError::Checkpoint(format!("expected a {DEEPROC_KIND} checkpoint, found {:?}", manifest.kind)));
        }
        let h: Hyper = serde_json::from_value(manifest.hyperparameters)?;
        let mut c = DeepROC::new(h.arch, h.z_star, 0)?;
        restore_into(&mut c.params, &loaded)?;
        Ok((c, manifest.seed))
    }
}

/// The DeepROC feedback law on full states.
pub struct DeepRocPolicy<'a> {
    pub rom: &'a DeepROM,
    pub controller: &'a DeepROC,
}

impl Policy for DeepRocPolicy<'_> {
    fn name(&self) -> &str {
        "deeproc"
    }

    fn act(&self, x: &[f64]) -> Result<Vec<f64>, ControlError> {
        self.controller.act(self.rom, x)
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{Binding, ParamId, Params};
use super::AutodiffError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Result<Var, AutodiffError> {
        match self {
            Activation::Relu => g.relu(x),
            Activation::None => Ok(x),
        }
    }
}

/// Fully connected `y = x Wᵀ + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(params: &mut Params, name: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let w = params.add_uniform(format!("{name}.weight"), &[fan_out, fan_in], fan_in, rng);
        let b = bias.then(|| params.add_uniform(format!("{name}.bias"), &[fan_out], fan_in, rng));
        Linear { w, b, fan_in, fan_out }
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Result<Var, AutodiffError> {
        g.linear(x, p[self.w], self.b.map(|b| p[b]))
    }
}

#[derive(Clone, Debug)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut Params,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = params.add_uniform(format!("{name}.weight"), &[c_out, c_in, k], c_in * k, rng);
        let b = Some(params.add_uniform(format!("{name}.bias"), &[c_out], c_in * k, rng));
        Conv1d { w, b, stride, padding }
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Result<Var, AutodiffError> {
        g.conv1d(x, p[self.w], self.b.map(|b| p[b]), self.stride, self.padding)
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose1d {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl ConvTranspose1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut Params,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = params.add_uniform(format!("{name}.weight"), &[c_in, c_out, k], c_in * k, rng);
        let b = Some(params.add_uniform(format!("{name}.bias"), &[c_out], c_in * k, rng));
        ConvTranspose1d { w, b, stride, padding, output_padding }
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Result<Var, AutodiffError> {
        g.conv_transpose1d(x, p[self.w], self.b.map(|b| p[b]), self.stride, self.padding, self.output_padding)
    }
}

/// Widths `[in, h1, ..., out]` with one activation and bias flag per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub bias: Vec<bool>,
}

impl MlpSpec {
    /// ReLU on every hidden layer, linear output, biases everywhere.
    pub fn relu(widths: &[usize]) -> Self {
        let n = widths.len() - 1;
        let mut activations = vec![Activation::Relu; n];
        activations[n - 1] = Activation::None;
        MlpSpec { widths: widths.to_vec(), activations, bias: vec![true; n] }
    }

    pub fn validate(&self) -> Result<(), AutodiffError> {
        let n = self.widths.len();
        if n < 2 || self.activations.len() != n - 1 || self.bias.len() != n - 1 || self.widths.contains(&0) {
            return Err(AutodiffError::Shape(format!("inconsistent MLP spec {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(params: &mut Params, name: &str, spec: MlpSpec, rng: &mut impl Rng) -> Result<Self, AutodiffError> {
        spec.validate()?;
        let layers = (0..spec.widths.len() - 1)
            .map(|i| Linear::new(params, &format!("{name}.{i}"), spec.widths[i], spec.widths[i + 1], spec.bias[i], rng))
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn in_width(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn out_width(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Result<Var, AutodiffError> {
        let w = g.value(x).shape().last().copied().unwrap_or(0);
        if w != self.in_width() {
            return Err(AutodiffError::Shape(format!("MLP expects width {}, got {w}", self.in_width())));
        }
        let mut h = x;
        for (layer, act) in self.layers.iter().zip(&self.spec.activations) {
            h = layer.forward(g, p, h)?;
            h = act.apply(g, h)?;
        }
        Ok(h)
    }
}

use super::params::Params;
use super::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &Params, lr: f64, decay: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState { lr, decay, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut Params, grads: &[Tensor]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter tensor");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, (p, g)) in params.tensors_mut().iter_mut().zip(grads).enumerate() {
            assert_eq!(p.shape(), g.shape(), "gradient shape for parameter {i}");
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gv;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gv * gv;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                *pv -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }

    /// Applies the exponential schedule; call once per epoch.
    pub fn end_epoch(&mut self) {
        self.lr *= self.decay;
    }
}

//! Reverse-mode tape. Every op appends a node holding its value and the
//! inputs it needs to propagate gradients; `backward` walks the tape in
//! reverse, which is a valid topological order by construction.

use crate::linalg::gemm::{gemm, Strided};

use super::conv::{self, ConvGeom};
use super::tensor::Tensor;
use super::AutodiffError;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScaled(Var, Var, f64),
    Relu(Var),
    Reshape(Var),
    Transpose(Var),
    ConcatCols(Var, Var),
    RowDot(Var, Var),
    RowScale(Var, Var),
    GuardedDiv { num: Var, den: Var, eps: f64 },
    SumSquares(Var),
    Sum(Var),
    Conv1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom, cols: Vec<f64> },
    ConvT1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// The computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients indexed by [`Var`]; `None` for nodes that do not require grad.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn shape_err(op: &str, msg: String) -> AutodiffError {
    AutodiffError::Shape(format!("{op}: {msg}"))
}

fn dims2(t: &Tensor, op: &str) -> Result<(usize, usize), AutodiffError> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(shape_err(op, format!("expected a 2-D tensor, got {s:?}"))),
    }
}

fn dims3(t: &Tensor, op: &str) -> Result<(usize, usize, usize), AutodiffError> {
    match t.shape() {
        [a, b, c] => Ok((*a, *b, *c)),
        s => Err(shape_err(op, format!("expected a 3-D tensor, got {s:?}"))),
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var], name: &str) -> Result<Var, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite(name.to_string()));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, requires_grad, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        assert!(value.is_finite(), "leaf tensors must be finite");
        self.nodes.push(Node { value, requires_grad, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (m, k) = dims2(self.value(a), "matmul")?;
        let (k2, n) = dims2(self.value(b), "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("inner dimensions {k} and {k2}")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            1.0,
            Strided::row_major(self.value(a).data(), k),
            Strided::row_major(self.value(b).data(), n),
            0.0,
            &mut out,
        );
        self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), &[a, b], "matmul")
    }

    /// `x wᵀ + b` for `x: [batch, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, AutodiffError> {
        let (bs, fin) = dims2(self.value(x), "linear")?;
        let (fout, fin2) = dims2(self.value(w), "linear")?;
        if fin != fin2 {
            return Err(shape_err("linear", format!("input width {fin} but weight expects {fin2}")));
        }
        let mut out = vec![0.0; bs * fout];
        if let Some(b) = b {
            let bias = self.value(b);
            if bias.len() != fout {
                return Err(shape_err("linear", format!("bias length {} for {fout} outputs", bias.len())));
            }
            for row in out.chunks_mut(fout) {
                row.copy_from_slice(bias.data());
            }
        }
        gemm(
            bs,
            fin,
            fout,
            1.0,
            Strided::row_major(self.value(x).data(), fin),
            Strided::transposed(self.value(w).data(), fin),
            1.0,
            &mut out,
        );
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        self.push(Tensor::from_parts(vec![bs, fout], out), Op::Linear { x, w, b }, &inputs, "linear")
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<(), AutodiffError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        Ok(())
    }

    fn zip_map(&mut self, a: Var, b: Var, op: Op, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, name)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push(value, op, &[a, b], name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_map(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_map(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_map(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    /// `a + c * b`.
    pub fn add_scaled(&mut self, a: Var, b: Var, c: f64) -> Result<Var, AutodiffError> {
        self.zip_map(a, b, Op::AddScaled(a, b, c), "add_scaled", |x, y| x + c * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let value = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|x| c * x).collect());
        self.push(value, Op::Scale(a, c), &[a], "scale")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let value = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&x| x.max(0.0)).collect());
        self.push(value, Op::Relu(a), &[a], "relu")
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if shape.iter().product::<usize>() != t.len() {
            return Err(shape_err("reshape", format!("{:?} -> {shape:?}", t.shape())));
        }
        let value = Tensor::from_parts(shape.to_vec(), t.data().to_vec());
        self.push(value, Op::Reshape(a), &[a], "reshape")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let (r, c) = dims2(self.value(a), "transpose")?;
        let src = self.value(a).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        self.push(Tensor::from_parts(vec![c, r], out), Op::Transpose(a), &[a], "transpose")
    }

    /// `[a | b]` for `a: [batch, n]`, `b: [batch, m]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ra, ca) = dims2(self.value(a), "concat_cols")?;
        let (rb, cb) = dims2(self.value(b), "concat_cols")?;
        if ra != rb {
            return Err(shape_err("concat_cols", format!("row counts {ra} and {rb}")));
        }
        let mut out = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            out.extend_from_slice(self.value(a).row(i));
            out.extend_from_slice(self.value(b).row(i));
        }
        self.push(Tensor::from_parts(vec![ra, ca + cb], out), Op::ConcatCols(a, b), &[a, b], "concat_cols")
    }

    /// Row-wise inner products, `[batch, n] x [batch, n] -> [batch, 1]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "row_dot")?;
        let (r, _) = dims2(self.value(a), "row_dot")?;
        let out = (0..r)
            .map(|i| self.value(a).row(i).iter().zip(self.value(b).row(i)).map(|(x, y)| x * y).sum())
            .collect();
        self.push(Tensor::from_parts(vec![r, 1], out), Op::RowDot(a, b), &[a, b], "row_dot")
    }

    /// Scales row `i` of `a: [batch, n]` by `s[i]`, `s: [batch, 1]`.
    pub fn row_scale(&mut self, a: Var, s: Var) -> Result<Var, AutodiffError> {
        let (r, c) = dims2(self.value(a), "row_scale")?;
        if self.value(s).shape() != [r, 1] {
            return Err(shape_err("row_scale", format!("scale shape {:?} for {r} rows", self.value(s).shape())));
        }
        let sv = self.value(s).data();
        let out = self.value(a).data().iter().enumerate().map(|(k, x)| x * sv[k / c]).collect();
        self.push(Tensor::from_parts(vec![r, c], out), Op::RowScale(a, s), &[a, s], "row_scale")
    }

    /// `num / den` elementwise where `den >= eps`, zero elsewhere.
    pub fn guarded_div(&mut self, num: Var, den: Var, eps: f64) -> Result<Var, AutodiffError> {
        self.zip_map(num, den, Op::GuardedDiv { num, den, eps }, "guarded_div", |x, y| if y >= eps { x / y } else { 0.0 })
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.value(a).data().iter().map(|x| x * x).sum();
        self.push(Tensor::scalar(s), Op::SumSquares(a), &[a], "sum_squares")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a], "sum")
    }

    /// Cross-correlation. `x: [batch, c_in, len]`, `w: [c_out, c_in, k]`, `b: [c_out]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, padding: usize) -> Result<Var, AutodiffError> {
        let (batch, c_in, len) = dims3(self.value(x), "conv1d")?;
        let (c_out, c_in2, k) = dims3(self.value(w), "conv1d")?;
        if c_in != c_in2 {
            return Err(shape_err("conv1d", format!("input has {c_in} channels, filters expect {c_in2}")));
        }
        let geom = ConvGeom::forward(batch, c_in, c_out, len, k, stride, padding)?;
        if let Some(b) = b {
            if self.value(b).len() != c_out {
                return Err(shape_err("conv1d", format!("bias length {} for {c_out} channels", self.value(b).len())));
            }
        }
        let bias = b.map(|b| self.value(b).data());
        let (out, cols) = conv::conv1d_forward(&geom, self.value(x).data(), self.value(w).data(), bias);
        let shape = vec![batch, c_out, geom.len_out];
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        self.push(Tensor::from_parts(shape, out), Op::Conv1d { x, w, b, geom, cols }, &inputs, "conv1d")
    }

    /// Adjoint-geometry convolution. `x: [batch, c_in, len]`, `w: [c_in, c_out, k]`,
    /// output length `(len − 1)·stride − 2·padding + k + output_padding`.
    pub fn conv_transpose1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Var, AutodiffError> {
        let (batch, c_in, len) = dims3(self.value(x), "conv_transpose1d")?;
        let (c_in2, c_out, k) = dims3(self.value(w), "conv_transpose1d")?;
        if c_in != c_in2 {
            return Err(shape_err("conv_transpose1d", format!("input has {c_in} channels, filters expect {c_in2}")));
        }
        let geom = ConvGeom::transposed(batch, c_in, c_out, len, k, stride, padding, output_padding)?;
        if let Some(b) = b {
            if self.value(b).len() != c_out {
                return Err(shape_err("conv_transpose1d", format!("bias length {} for {c_out} channels", self.value(b).len())));
            }
        }
        let bias = b.map(|b| self.value(b).data());
        let out = conv::conv_t_forward(&geom, self.value(x).data(), self.value(w).data(), bias);
        let shape = vec![batch, c_out, geom.len_out];
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        self.push(Tensor::from_parts(shape, out), Op::ConvT1d { x, w, b, geom }, &inputs, "conv_transpose1d")
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NonScalarLoss(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(&node.op, &g, &mut grads);
            grads[i] = Some(g);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| {
                if n.requires_grad {
                    Some(Tensor::from_parts(n.value.shape().to_vec(), g.unwrap_or_else(|| vec![0.0; n.value.len()])))
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, op: &Op, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(a).shape()[0], self.value(a).shape()[1]);
                let n = self.value(b).shape()[1];
                self.accumulate(grads, a, |ga| {
                    gemm(m, n, k, 1.0, Strided::row_major(g, n), Strided::transposed(self.value(b).data(), n), 1.0, ga)
                });
                self.accumulate(grads, b, |gb| {
                    gemm(k, m, n, 1.0, Strided::transposed(self.value(a).data(), k), Strided::row_major(g, n), 1.0, gb)
                });
            }
            Op::Linear { x, w, b } => {
                let (bs, fin) = (self.value(x).shape()[0], self.value(x).shape()[1]);
                let fout = self.value(w).shape()[0];
                self.accumulate(grads, x, |gx| {
                    gemm(bs, fout, fin, 1.0, Strided::row_major(g, fout), Strided::row_major(self.value(w).data(), fin), 1.0, gx)
                });
                self.accumulate(grads, w, |gw| {
                    gemm(fout, bs, fin, 1.0, Strided::transposed(g, fout), Strided::row_major(self.value(x).data(), fin), 1.0, gw)
                });
                if let Some(b) = b {
                    self.accumulate(grads, b, |gb| {
                        for row in g.chunks(fout) {
                            gb.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(s, v)| *s += v));
                self.accumulate(grads, b, |gb| gb.iter_mut().zip(g).for_each(|(s, v)| *s += v));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(s, v)| *s += v));
                self.accumulate(grads, b, |gb| gb.iter_mut().zip(g).for_each(|(s, v)| *s -= v));
            }
            Op::AddScaled(a, b, c) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(s, v)| *s += v));
                self.accumulate(grads, b, |gb| gb.iter_mut().zip(g).for_each(|(s, v)| *s += c * v));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                self.accumulate(grads, a, |ga| {
                    for ((s, v), y) in ga.iter_mut().zip(g).zip(vb) {
                        *s += v * y;
                    }
                });
                self.accumulate(grads, b, |gb| {
                    for ((s, v), x) in gb.iter_mut().zip(g).zip(va) {
                        *s += v * x;
                    }
                });
            }
            Op::Scale(a, c) => self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(s, v)| *s += c * v)),
            Op::Relu(a) => {
                let va = self.value(a).data();
                self.accumulate(grads, a, |ga| {
                    for ((s, v), x) in ga.iter_mut().zip(g).zip(va) {
                        if *x > 0.0 {
                            *s += v;
                        }
                    }
                });
            }
            Op::Reshape(a) => self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(s, v)| *s += v)),
            Op::Transpose(a) => {
                let (r, c) = (self.value(a).shape()[0], self.value(a).shape()[1]);
                self.accumulate(grads, a, |ga| {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(a).shape()[1];
                let cb = self.value(b).shape()[1];
                let rows = self.value(a).shape()[0];
                self.accumulate(grads, a, |ga| {
                    for i in 0..rows {
                        for j in 0..ca {
                            ga[i * ca + j] += g[i * (ca + cb) + j];
                        }
                    }
                });
                self.accumulate(grads, b, |gb| {
                    for i in 0..rows {
                        for j in 0..cb {
                            gb[i * cb + j] += g[i * (ca + cb) + ca + j];
                        }
                    }
                });
            }
            Op::RowDot(a, b) => {
                let c = self.value(a).shape()[1];
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                self.accumulate(grads, a, |ga| ga.iter_mut().enumerate().for_each(|(k, s)| *s += g[k / c] * vb[k]));
                self.accumulate(grads, b, |gb| gb.iter_mut().enumerate().for_each(|(k, s)| *s += g[k / c] * va[k]));
            }
            Op::RowScale(a, sc) => {
                let c = self.value(a).shape()[1];
                let (va, vs) = (self.value(a).data(), self.value(sc).data());
                self.accumulate(grads, a, |ga| ga.iter_mut().enumerate().for_each(|(k, s)| *s += g[k] * vs[k / c]));
                self.accumulate(grads, sc, |gs| {
                    for (k, (gv, x)) in g.iter().zip(va).enumerate() {
                        gs[k / c] += gv * x;
                    }
                });
            }
            Op::GuardedDiv { num, den, eps } => {
                let (vn, vd) = (self.value(num).data(), self.value(den).data());
                self.accumulate(grads, num, |gn| {
                    for k in 0..gn.len() {
                        if vd[k] >= eps {
                            gn[k] += g[k] / vd[k];
                        }
                    }
                });
                self.accumulate(grads, den, |gd| {
                    for k in 0..gd.len() {
                        if vd[k] >= eps {
                            gd[k] -= g[k] * vn[k] / (vd[k] * vd[k]);
                        }
                    }
                });
            }
            Op::SumSquares(a) => {
                let va = self.value(a).data();
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(va).for_each(|(s, x)| *s += 2.0 * g[0] * x));
            }
            Op::Sum(a) => self.accumulate(grads, a, |ga| ga.iter_mut().for_each(|s| *s += g[0])),
            Op::Conv1d { x, w, b, ref geom, ref cols } => {
                let need_x = self.nodes[x.0].requires_grad;
                let need_w = self.nodes[w.0].requires_grad;
                let (dx, dw, db) = conv::conv1d_backward(geom, g, self.value(w).data(), cols, need_x, need_w);
                if let Some(dx) = dx {
                    self.accumulate(grads, x, |gx| gx.iter_mut().zip(&dx).for_each(|(s, v)| *s += v));
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, w, |gw| gw.iter_mut().zip(&dw).for_each(|(s, v)| *s += v));
                }
                if let Some(b) = b {
                    self.accumulate(grads, b, |gb| gb.iter_mut().zip(&db).for_each(|(s, v)| *s += v));
                }
            }
            Op::ConvT1d { x, w, b, ref geom } => {
                let need_x = self.nodes[x.0].requires_grad;
                let need_w = self.nodes[w.0].requires_grad;
                let (dx, dw, db) =
                    conv::conv_t_backward(geom, g, self.value(x).data(), self.value(w).data(), need_x, need_w);
                if let Some(dx) = dx {
                    self.accumulate(grads, x, |gx| gx.iter_mut().zip(&dx).for_each(|(s, v)| *s += v));
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, w, |gw| gw.iter_mut().zip(&dw).for_each(|(s, v)| *s += v));
                }
                if let Some(b) = b {
                    self.accumulate(grads, b, |gb| gb.iter_mut().zip(&db).for_each(|(s, v)| *s += v));
                }
            }
        }
    }
}

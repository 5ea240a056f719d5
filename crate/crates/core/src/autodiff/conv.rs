//! im2col kernels for 1-D convolution and its transpose.

use crate::linalg::gemm::{gemm, Strided};

use super::AutodiffError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len_in: usize,
    pub len_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn forward(
        batch: usize,
        c_in: usize,
        c_out: usize,
        len_in: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self, AutodiffError> {
        if stride == 0 || k == 0 {
            return Err(AutodiffError::Shape("conv1d: stride and kernel size must be positive".into()));
        }
        if len_in + 2 * padding < k {
            return Err(AutodiffError::Shape(format!(
                "conv1d: length {len_in} with padding {padding} is shorter than kernel {k}"
            )));
        }
        let len_out = (len_in + 2 * padding - k) / stride + 1;
        Ok(ConvGeom { batch, c_in, c_out, len_in, len_out, k, stride, padding })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn transposed(
        batch: usize,
        c_in: usize,
        c_out: usize,
        len_in: usize,
        k: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self, AutodiffError> {
        if stride == 0 || k == 0 || len_in == 0 {
            return Err(AutodiffError::Shape("conv_transpose1d: stride, kernel and length must be positive".into()));
        }
        if output_padding >= stride {
            return Err(AutodiffError::Shape(format!(
                "conv_transpose1d: output padding {output_padding} must be below stride {stride}"
            )));
        }
        let full = (len_in - 1) * stride + k + output_padding;
        if full <= 2 * padding {
            return Err(AutodiffError::Shape("conv_transpose1d: padding consumes the whole output".into()));
        }
        Ok(ConvGeom { batch, c_in, c_out, len_in, len_out: full - 2 * padding, k, stride, padding })
    }

    /// Position in the long signal touched by short index `t` and tap `j`.
    #[inline]
    fn tap(&self, t: usize, j: usize, long_len: usize) -> Option<usize> {
        let p = (t * self.stride + j) as isize - self.padding as isize;
        (p >= 0 && (p as usize) < long_len).then_some(p as usize)
    }
}

/// Gathers `x: [batch, ch, long]` into `[batch * short, ch * k]`.
fn im2col(g: &ConvGeom, x: &[f64], ch: usize, long: usize, short: usize) -> Vec<f64> {
    let width = ch * g.k;
    let mut cols = vec![0.0; g.batch * short * width];
    for b in 0..g.batch {
        for t in 0..short {
            let row = &mut cols[(b * short + t) * width..(b * short + t + 1) * width];
            for c in 0..ch {
                let xs = &x[(b * ch + c) * long..(b * ch + c + 1) * long];
                for j in 0..g.k {
                    if let Some(p) = g.tap(t, j, long) {
                        row[c * g.k + j] = xs[p];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds columns back into `[batch, ch, long]`.
fn col2im(g: &ConvGeom, cols: &[f64], ch: usize, long: usize, short: usize) -> Vec<f64> {
    let width = ch * g.k;
    let mut x = vec![0.0; g.batch * ch * long];
    for b in 0..g.batch {
        for t in 0..short {
            let row = &cols[(b * short + t) * width..(b * short + t + 1) * width];
            for c in 0..ch {
                let xs = &mut x[(b * ch + c) * long..(b * ch + c + 1) * long];
                for j in 0..g.k {
                    if let Some(p) = g.tap(t, j, long) {
                        xs[p] += row[c * g.k + j];
                    }
                }
            }
        }
    }
    x
}

/// `[batch * len, ch]` (position-major) to `[batch, ch, len]`.
fn unflatten(v: &[f64], batch: usize, ch: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; batch * ch * len];
    for b in 0..batch {
        for t in 0..len {
            for c in 0..ch {
                out[(b * ch + c) * len + t] = v[(b * len + t) * ch + c];
            }
        }
    }
    out
}

fn flatten(v: &[f64], batch: usize, ch: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; batch * ch * len];
    for b in 0..batch {
        for c in 0..ch {
            for t in 0..len {
                out[(b * len + t) * ch + c] = v[(b * ch + c) * len + t];
            }
        }
    }
    out
}

fn channel_sums(g: &[f64], batch: usize, ch: usize, len: usize) -> Vec<f64> {
    let mut db = vec![0.0; ch];
    for b in 0..batch {
        for (c, s) in db.iter_mut().enumerate() {
            *s += g[(b * ch + c) * len..(b * ch + c + 1) * len].iter().sum::<f64>();
        }
    }
    db
}

pub fn conv1d_forward(g: &ConvGeom, x: &[f64], w: &[f64], bias: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let cols = im2col(g, x, g.c_in, g.len_in, g.len_out);
    let width = g.c_in * g.k;
    let m = g.batch * g.len_out;
    let mut y = vec![0.0; m * g.c_out];
    gemm(m, width, g.c_out, 1.0, Strided::row_major(&cols, width), Strided::transposed(w, width), 0.0, &mut y);
    let mut out = unflatten(&y, g.batch, g.c_out, g.len_out);
    if let Some(bias) = bias {
        add_bias(&mut out, bias, g.batch, g.c_out, g.len_out);
    }
    (out, cols)
}

fn add_bias(out: &mut [f64], bias: &[f64], batch: usize, ch: usize, len: usize) {
    for b in 0..batch {
        for (c, &bv) in bias.iter().enumerate().take(ch) {
            out[(b * ch + c) * len..(b * ch + c + 1) * len].iter_mut().for_each(|v| *v += bv);
        }
    }
}

type Grads = (Option<Vec<f64>>, Option<Vec<f64>>, Vec<f64>);

pub fn conv1d_backward(g: &ConvGeom, dout: &[f64], w: &[f64], cols: &[f64], need_x: bool, need_w: bool) -> Grads {
    let width = g.c_in * g.k;
    let m = g.batch * g.len_out;
    let dy = flatten(dout, g.batch, g.c_out, g.len_out);
    let dw = need_w.then(|| {
        let mut dw = vec![0.0; g.c_out * width];
        gemm(g.c_out, m, width, 1.0, Strided::transposed(&dy, g.c_out), Strided::row_major(cols, width), 0.0, &mut dw);
        dw
    });
    let dx = need_x.then(|| {
        let mut dcols = vec![0.0; m * width];
        gemm(m, g.c_out, width, 1.0, Strided::row_major(&dy, g.c_out), Strided::row_major(w, width), 0.0, &mut dcols);
        col2im(g, &dcols, g.c_in, g.len_in, g.len_out)
    });
    (dx, dw, channel_sums(dout, g.batch, g.c_out, g.len_out))
}

pub fn conv_t_forward(g: &ConvGeom, x: &[f64], w: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    // x is the "short" signal; each input position spreads over k output taps.
    let xt = flatten(x, g.batch, g.c_in, g.len_in);
    let m = g.batch * g.len_in;
    let width = g.c_out * g.k;
    let mut cols = vec![0.0; m * width];
    gemm(m, g.c_in, width, 1.0, Strided::row_major(&xt, g.c_in), Strided::row_major(w, width), 0.0, &mut cols);
    let mut out = col2im(g, &cols, g.c_out, g.len_out, g.len_in);
    if let Some(bias) = bias {
        add_bias(&mut out, bias, g.batch, g.c_out, g.len_out);
    }
    out
}

pub fn conv_t_backward(g: &ConvGeom, dout: &[f64], x: &[f64], w: &[f64], need_x: bool, need_w: bool) -> Grads {
    let m = g.batch * g.len_in;
    let width = g.c_out * g.k;
    let dcols = im2col(g, dout, g.c_out, g.len_out, g.len_in);
    let dw = need_w.then(|| {
        let xt = flatten(x, g.batch, g.c_in, g.len_in);
        let mut dw = vec![0.0; g.c_in * width];
        gemm(g.c_in, m, width, 1.0, Strided::transposed(&xt, g.c_in), Strided::row_major(&dcols, width), 0.0, &mut dw);
        dw
    });
    let dx = need_x.then(|| {
        let mut dxt = vec![0.0; m * g.c_in];
        gemm(m, width, g.c_in, 1.0, Strided::row_major(&dcols, width), Strided::transposed(w, width), 0.0, &mut dxt);
        unflatten(&dxt, g.batch, g.c_in, g.len_in)
    });
    (dx, dw, channel_sums(dout, g.batch, g.c_out, g.len_out))
}

use serde::{Deserialize, Serialize};

use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor4};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

/// One layer as declared; input-dependent sizes are resolved by the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Zero-padded "same" convolution (padding `kernel / 2`).
    Conv {
        out_ch: usize,
        kernel: usize,
        stride: usize,
    },
    /// Adjoint of a `Conv` with the same kernel and stride; `output_padding`
    /// selects among the input sizes that conv maps onto the same output.
    TransposedConv {
        out_ch: usize,
        kernel: usize,
        stride: usize,
        output_padding: usize,
    },
    Dense {
        out_dim: usize,
    },
    Activation {
        function: Activation,
    },
    Flatten,
    Reshape {
        dims: [usize; 3],
    },
}

impl LayerSpec {
    pub fn conv(out_ch: usize, kernel: usize, stride: usize) -> Self {
        LayerSpec::Conv { out_ch, kernel, stride }
    }

    /// Transposed conv undoing a stride-`stride` `Conv` applied to a map of
    /// size `target` (per axis).
    pub fn transposed_for(out_ch: usize, kernel: usize, stride: usize, target: usize) -> Self {
        let small = target.div_ceil(stride);
        let pad = kernel / 2;
        let base = (small - 1) * stride + kernel;
        let output_padding = (target + 2 * pad).saturating_sub(base);
        LayerSpec::TransposedConv {
            out_ch,
            kernel,
            stride,
            output_padding,
        }
    }

    pub fn dense(out_dim: usize) -> Self {
        LayerSpec::Dense { out_dim }
    }

    pub fn act(function: Activation) -> Self {
        LayerSpec::Activation { function }
    }
}

/// A layer with its shapes resolved and its slice of the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub spec: LayerSpec,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub n_weight: usize,
    pub n_bias: usize,
    pub offset: usize,
}

/// im2col geometry: a stride-`s` conv maps a `c×h×w` map to `oh×ow`.
#[derive(Debug, Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    p: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn im2col(&self, x: &[f64], col: &mut [f64]) {
        let cols = self.cols();
        for ci in 0..self.c {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let r = (ci * self.k + ky) * self.k + kx;
                    let dst = &mut col[r * cols..(r + 1) * cols];
                    for oy in 0..self.oh {
                        let iy = (oy * self.s + ky) as isize - self.p as isize;
                        let row = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        if iy < 0 || iy >= self.h as isize {
                            row.fill(0.0);
                            continue;
                        }
                        let src = &x[(ci * self.h + iy as usize) * self.w..][..self.w];
                        for (ox, v) in row.iter_mut().enumerate() {
                            let ix = (ox * self.s + kx) as isize - self.p as isize;
                            *v = if ix < 0 || ix >= self.w as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of `im2col`; accumulates into `x`.
    fn col2im(&self, col: &[f64], x: &mut [f64]) {
        let cols = self.cols();
        for ci in 0..self.c {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let r = (ci * self.k + ky) * self.k + kx;
                    let src = &col[r * cols..(r + 1) * cols];
                    for oy in 0..self.oh {
                        let iy = (oy * self.s + ky) as isize - self.p as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut x[(ci * self.h + iy as usize) * self.w..][..self.w];
                        for ox in 0..self.ow {
                            let ix = (ox * self.s + kx) as isize - self.p as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

impl Layer {
    pub fn resolve(spec: LayerSpec, in_shape: [usize; 3], offset: usize) -> Result<Self> {
        let [c, h, w] = in_shape;
        let check_kernel = |kernel: usize, stride: usize| -> Result<()> {
            if kernel % 2 == 0 || stride == 0 {
                return Err(Error::InvalidSpec(format!(
                    "kernel must be odd and stride >= 1, got kernel {kernel}, stride {stride}"
                )));
            }
            Ok(())
        };
        let (out_shape, n_weight, n_bias) = match spec {
            LayerSpec::Conv { out_ch, kernel, stride } => {
                check_kernel(kernel, stride)?;
                if out_ch == 0 {
                    return Err(Error::InvalidSpec("conv needs out_ch >= 1".into()));
                }
                let out = |n: usize| n.div_ceil(stride);
                ([out_ch, out(h), out(w)], out_ch * c * kernel * kernel, out_ch)
            }
            LayerSpec::TransposedConv {
                out_ch,
                kernel,
                stride,
                output_padding,
            } => {
                check_kernel(kernel, stride)?;
                if out_ch == 0 || output_padding >= stride {
                    return Err(Error::InvalidSpec(format!(
                        "transposed conv needs out_ch >= 1 and output_padding < stride, got {out_ch}, {output_padding}"
                    )));
                }
                let pad = kernel / 2;
                let out = |n: usize| -> Result<usize> {
                    ((n - 1) * stride + kernel + output_padding)
                        .checked_sub(2 * pad)
                        .filter(|&o| o >= 1)
                        .ok_or_else(|| Error::InvalidSpec("transposed conv output is empty".into()))
                };
                ([out_ch, out(h)?, out(w)?], c * out_ch * kernel * kernel, out_ch)
            }
            LayerSpec::Dense { out_dim } => {
                if out_dim == 0 {
                    return Err(Error::InvalidSpec("dense needs out_dim >= 1".into()));
                }
                ([out_dim, 1, 1], out_dim * c * h * w, out_dim)
            }
            LayerSpec::Activation { .. } => (in_shape, 0, 0),
            LayerSpec::Flatten => ([c * h * w, 1, 1], 0, 0),
            LayerSpec::Reshape { dims } => {
                if dims.iter().product::<usize>() != c * h * w {
                    return Err(Error::Dimension(format!(
                        "cannot reshape {in_shape:?} to {dims:?}"
                    )));
                }
                (dims, 0, 0)
            }
        };
        Ok(Layer {
            spec,
            in_shape,
            out_shape,
            n_weight,
            n_bias,
            offset,
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_weight + self.n_bias
    }

    /// Fan-in and fan-out used by Xavier initialization.
    pub fn fans(&self) -> (usize, usize) {
        let [c, h, w] = self.in_shape;
        match self.spec {
            LayerSpec::Conv { out_ch, kernel, .. } => (c * kernel * kernel, out_ch * kernel * kernel),
            LayerSpec::TransposedConv { out_ch, kernel, .. } => {
                (out_ch * kernel * kernel, c * kernel * kernel)
            }
            LayerSpec::Dense { out_dim } => (c * h * w, out_dim),
            _ => (0, 0),
        }
    }

    fn geom(&self) -> Option<Geom> {
        let (k, s, big, small) = match self.spec {
            LayerSpec::Conv { kernel, stride, .. } => (kernel, stride, self.in_shape, self.out_shape),
            LayerSpec::TransposedConv { kernel, stride, .. } => {
                (kernel, stride, self.out_shape, self.in_shape)
            }
            _ => return None,
        };
        Some(Geom {
            c: big[0],
            h: big[1],
            w: big[2],
            k,
            s,
            p: k / 2,
            oh: small[1],
            ow: small[2],
        })
    }

    pub fn forward(&self, params: &[f64], x: &Tensor4) -> Result<Tensor4> {
        let n = x.batch();
        let out_shape = [n, self.out_shape[0], self.out_shape[1], self.out_shape[2]];
        let (wt, b) = params[self.offset..self.offset + self.n_params()].split_at(self.n_weight);
        match self.spec {
            LayerSpec::Conv { out_ch, .. } => {
                let g = self.geom().expect("conv geometry");
                let mut col = vec![0.0; g.rows() * g.cols()];
                let mut y = Tensor4::zeros(out_shape);
                let plane = g.cols();
                for s in 0..n {
                    g.im2col(x.sample(s), &mut col);
                    let ys = y.sample_mut(s);
                    for (co, chunk) in ys.chunks_mut(plane).enumerate().take(out_ch) {
                        chunk.fill(b[co]);
                    }
                    gemm_nn(out_ch, plane, g.rows(), wt, &col, ys);
                }
                Ok(y)
            }
            LayerSpec::TransposedConv { out_ch, .. } => {
                let g = self.geom().expect("conv geometry");
                let cin = self.in_shape[0];
                let mut col = vec![0.0; g.rows() * g.cols()];
                let mut y = Tensor4::zeros(out_shape);
                let plane = g.h * g.w;
                for s in 0..n {
                    col.fill(0.0);
                    gemm_tn(g.rows(), g.cols(), cin, wt, x.sample(s), &mut col);
                    let ys = y.sample_mut(s);
                    for (co, chunk) in ys.chunks_mut(plane).enumerate().take(out_ch) {
                        chunk.fill(b[co]);
                    }
                    g.col2im(&col, ys);
                }
                Ok(y)
            }
            LayerSpec::Dense { out_dim } => {
                let d = x.sample_len();
                let mut y = Tensor4::zeros(out_shape);
                for s in 0..n {
                    y.sample_mut(s).copy_from_slice(b);
                }
                gemm_nt(n, out_dim, d, x.data(), wt, y.data_mut());
                Ok(y)
            }
            LayerSpec::Activation { function } => {
                let mut y = x.clone().reshaped(out_shape)?;
                match function {
                    Activation::Tanh => y.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
                    Activation::Relu => y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
                    Activation::Identity => {}
                }
                Ok(y)
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => x.clone().reshaped(out_shape),
        }
    }

    /// Input gradient; parameter gradients are accumulated into `dparams`
    /// (the full model-sized vector).
    pub fn backward(
        &self,
        params: &[f64],
        x: &Tensor4,
        y: &Tensor4,
        dy: &Tensor4,
        dparams: &mut [f64],
    ) -> Result<Tensor4> {
        let n = x.batch();
        let in_shape = [n, self.in_shape[0], self.in_shape[1], self.in_shape[2]];
        let wt = &params[self.offset..self.offset + self.n_weight];
        let (dw, db) = dparams[self.offset..self.offset + self.n_params()].split_at_mut(self.n_weight);
        match self.spec {
            LayerSpec::Conv { out_ch, .. } => {
                let g = self.geom().expect("conv geometry");
                let plane = g.cols();
                let mut col = vec![0.0; g.rows() * plane];
                let mut dcol = vec![0.0; g.rows() * plane];
                let mut dx = Tensor4::zeros(in_shape);
                for s in 0..n {
                    let dys = dy.sample(s);
                    for (co, chunk) in dys.chunks(plane).enumerate().take(out_ch) {
                        db[co] += chunk.iter().sum::<f64>();
                    }
                    g.im2col(x.sample(s), &mut col);
                    gemm_nt(out_ch, g.rows(), plane, dys, &col, dw);
                    dcol.fill(0.0);
                    gemm_tn(g.rows(), plane, out_ch, wt, dys, &mut dcol);
                    g.col2im(&dcol, dx.sample_mut(s));
                }
                Ok(dx)
            }
            LayerSpec::TransposedConv { out_ch, .. } => {
                let g = self.geom().expect("conv geometry");
                let cin = self.in_shape[0];
                let plane = g.h * g.w;
                let mut dcol = vec![0.0; g.rows() * g.cols()];
                let mut dx = Tensor4::zeros(in_shape);
                for s in 0..n {
                    let dys = dy.sample(s);
                    for (co, chunk) in dys.chunks(plane).enumerate().take(out_ch) {
                        db[co] += chunk.iter().sum::<f64>();
                    }
                    g.im2col(dys, &mut dcol);
                    gemm_nn(cin, g.cols(), g.rows(), wt, &dcol, dx.sample_mut(s));
                    gemm_nt(cin, g.rows(), g.cols(), x.sample(s), &dcol, dw);
                }
                Ok(dx)
            }
            LayerSpec::Dense { out_dim } => {
                let d = x.sample_len();
                for s in 0..n {
                    for (acc, v) in db.iter_mut().zip(dy.sample(s)) {
                        *acc += v;
                    }
                }
                gemm_tn(out_dim, d, n, dy.data(), x.data(), dw);
                let mut dx = Tensor4::zeros(in_shape);
                gemm_nn(n, d, out_dim, dy.data(), wt, dx.data_mut());
                Ok(dx)
            }
            LayerSpec::Activation { function } => {
                let mut dx = dy.clone().reshaped(in_shape)?;
                match function {
                    Activation::Tanh => {
                        for (g, &v) in dx.data_mut().iter_mut().zip(y.data()) {
                            *g *= 1.0 - v * v;
                        }
                    }
                    Activation::Relu => {
                        for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                            if v <= 0.0 {
                                *g = 0.0;
                            }
                        }
                    }
                    Activation::Identity => {}
                }
                Ok(dx)
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => dy.clone().reshaped(in_shape),
        }
    }
}

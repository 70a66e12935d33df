//! Dense building blocks with explicit backward passes.
//!
//! All matrices are row-per-timestep: an input of `n` tokens with `d`
//! channels is `n × d`, and linear maps are applied as `x · W`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// tanh approximation of GELU
    Gelu,
    Identity,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let u = GELU_C * (x + GELU_A * x * x * x);
                0.5 * x * (1.0 + u.tanh())
            }
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let u = GELU_C * (x + GELU_A * x * x * x);
                let th = u.tanh();
                let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `c += aᵀ · b`
pub(crate) fn add_at_b(c: &mut Array2<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>) {
    general_mat_mul(1.0, &a.t(), &b, 1.0, c);
}

/// `c += column sums of a`
pub(crate) fn add_col_sums(c: &mut Array1<f64>, a: ArrayView2<f64>) {
    *c += &a.sum_axis(Axis(0));
}

/// `x · w + b`
pub(crate) fn affine(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = x.dot(w);
    out += b;
    out
}

/// Zero-padded, length-preserving index offsets of a dilated kernel.
fn tap_offset(tap: usize, kernel: usize, dilation: usize) -> isize {
    (tap as isize - (kernel / 2) as isize) * dilation as isize
}

/// `T × (k·d_in)` matrix whose row `t` holds the `k` dilated taps around `t`.
pub(crate) fn im2col(x: ArrayView2<f64>, kernel: usize, dilation: usize) -> Array2<f64> {
    let (len, d_in) = x.dim();
    let mut cols = Array2::zeros((len, kernel * d_in));
    for tap in 0..kernel {
        let off = tap_offset(tap, kernel, dilation);
        for t in 0..len {
            let src = t as isize + off;
            if src < 0 || src >= len as isize {
                continue;
            }
            cols.slice_mut(s![t, tap * d_in..(tap + 1) * d_in])
                .assign(&x.row(src as usize));
        }
    }
    cols
}

/// Scatters column gradients back onto the input (adjoint of [`im2col`]).
pub(crate) fn col2im_add(
    dcols: ArrayView2<f64>,
    kernel: usize,
    dilation: usize,
    mut dx: ArrayViewMut2<f64>,
) {
    let (len, d_in) = dx.dim();
    for tap in 0..kernel {
        let off = tap_offset(tap, kernel, dilation);
        for t in 0..len {
            let src = t as isize + off;
            if src < 0 || src >= len as isize {
                continue;
            }
            let mut row = dx.row_mut(src as usize);
            row += &dcols.slice(s![t, tap * d_in..(tap + 1) * d_in]);
        }
    }
}

/// Dilated 1D convolution over time, stored as a `(k·d_in) × d_out` matrix
/// (tap-major rows) plus bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Conv1d {
    pub fn zeros(kernel: usize, d_in: usize, d_out: usize) -> Self {
        Self {
            weight: Array2::zeros((kernel * d_in, d_out)),
            bias: Array1::zeros(d_out),
        }
    }
}

/// Three (or more) dilated conv layers, each followed by the activation and a
/// residual add. The first residual goes through a `d_in × d` projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock {
    pub proj: Array2<f64>,
    pub layers: Vec<Conv1d>,
}

pub(crate) struct ConvLayerCache {
    cols: Array2<f64>,
    pre: Array2<f64>,
}

pub(crate) struct ConvBlockCache {
    input: Array2<f64>,
    layers: Vec<ConvLayerCache>,
}

impl ConvBlock {
    pub fn zeros(kernel: usize, d_in: usize, d: usize, n_layers: usize) -> Self {
        let layers = (0..n_layers)
            .map(|i| Conv1d::zeros(kernel, if i == 0 { d_in } else { d }, d))
            .collect();
        Self {
            proj: Array2::zeros((d_in, d)),
            layers,
        }
    }

    pub(crate) fn forward(
        &self,
        x: ArrayView2<f64>,
        kernel: usize,
        dilations: &[usize],
        act: Activation,
        keep_cache: bool,
    ) -> (Array2<f64>, Option<ConvBlockCache>) {
        let mut h = x.to_owned();
        let mut caches = Vec::new();
        for (i, (layer, &dil)) in self.layers.iter().zip(dilations).enumerate() {
            let cols = im2col(h.view(), kernel, dil);
            let pre = affine(cols.view(), &layer.weight, &layer.bias);
            let mut out = pre.mapv(|v| act.apply(v));
            if i == 0 {
                out += &x.dot(&self.proj);
            } else {
                out += &h;
            }
            if keep_cache {
                caches.push(ConvLayerCache { cols, pre });
            }
            h = out;
        }
        let cache = keep_cache.then(|| ConvBlockCache {
            input: x.to_owned(),
            layers: caches,
        });
        (h, cache)
    }

    /// Accumulates parameter gradients. The input gradient is not needed
    /// because blocks read data directly.
    pub(crate) fn backward(
        &self,
        cache: &ConvBlockCache,
        dout: Array2<f64>,
        kernel: usize,
        dilations: &[usize],
        act: Activation,
        grad: &mut ConvBlock,
    ) {
        let mut dh = dout;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let lc = &cache.layers[i];
            let mut dpre = lc.pre.mapv(|v| act.derivative(v));
            dpre *= &dh;
            add_at_b(&mut grad.layers[i].weight, lc.cols.view(), dpre.view());
            add_col_sums(&mut grad.layers[i].bias, dpre.view());
            if i == 0 {
                add_at_b(&mut grad.proj, cache.input.view(), dh.view());
            } else {
                let dcols = dpre.dot(&layer.weight.t());
                let mut dprev = dh.clone();
                col2im_add(dcols.view(), kernel, dilations[i], dprev.view_mut());
                dh = dprev;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

pub(crate) struct LayerNormCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

impl LayerNorm {
    pub fn new(d: usize) -> Self {
        Self {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
        }
    }

    pub(crate) fn forward(&self, x: ArrayView2<f64>, eps: f64) -> (Array2<f64>, LayerNormCache) {
        let (n, d) = x.dim();
        let mut xhat = Array2::zeros((n, d));
        let mut rstd = Array1::zeros(n);
        for (i, row) in x.outer_iter().enumerate() {
            let mean = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd[i] = r;
            xhat.row_mut(i)
                .iter_mut()
                .zip(row)
                .for_each(|(o, v)| *o = (v - mean) * r);
        }
        let out = &xhat * &self.gamma + &self.beta;
        (out, LayerNormCache { xhat, rstd })
    }

    pub(crate) fn backward(
        &self,
        cache: &LayerNormCache,
        dout: ArrayView2<f64>,
        grad: &mut LayerNorm,
    ) -> Array2<f64> {
        let d = dout.ncols() as f64;
        grad.gamma += &(&dout * &cache.xhat).sum_axis(Axis(0));
        grad.beta += &dout.sum_axis(Axis(0));
        let dxhat = &dout * &self.gamma;
        let mut dx = Array2::zeros(dout.raw_dim());
        for i in 0..dout.nrows() {
            let g = dxhat.row(i);
            let xh = cache.xhat.row(i);
            let sum_g = g.sum();
            let sum_gx = g.dot(&xh);
            let r = cache.rstd[i];
            dx.row_mut(i)
                .iter_mut()
                .zip(g.iter().zip(xh))
                .for_each(|(o, (gv, xv))| *o = r / d * (d * gv - sum_g - xv * sum_gx));
        }
        dx
    }
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Gradient of a row-wise softmax given its output `p` and upstream `dp`.
pub(crate) fn softmax_rows_backward(p: ArrayView2<f64>, dp: ArrayView2<f64>) -> Array2<f64> {
    let mut ds = Array2::zeros(p.raw_dim());
    for i in 0..p.nrows() {
        let pr = p.row(i);
        let dr = dp.row(i);
        let inner = pr.dot(&dr);
        ds.row_mut(i)
            .iter_mut()
            .zip(pr.iter().zip(dr))
            .for_each(|(o, (pv, dv))| *o = pv * (dv - inner));
    }
    ds
}

/// L2-normalizes each row; returns the normalized rows and the original norms.
pub(crate) fn l2_normalize_rows(y: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms: Array1<f64> = y
        .outer_iter()
        .map(|r| r.dot(&r).sqrt().max(1e-12))
        .collect();
    let mut z = y.to_owned();
    for (mut row, n) in z.outer_iter_mut().zip(norms.iter()) {
        row /= *n;
    }
    (z, norms)
}

/// Backward of `z = y / ‖y‖` for one row.
pub(crate) fn l2_normalize_backward(
    z: ArrayView1<f64>,
    norm: f64,
    dz: ArrayView1<f64>,
) -> Array1<f64> {
    let proj = z.dot(&dz);
    (&dz - &(&z * proj)) / norm
}

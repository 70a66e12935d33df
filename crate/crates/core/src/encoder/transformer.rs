//! Pre-norm transformer encoder layer with multi-head self-attention.

use ndarray::{s, Array1, Array2, ArrayView2};

use super::nn::{
    add_at_b, add_col_sums, affine, softmax_rows, softmax_rows_backward, Activation, LayerNorm,
    LayerNormCache,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TransformerLayer {
    pub ln1: LayerNorm,
    /// `d × 3d`, columns ordered Q | K | V, heads contiguous inside each.
    pub w_qkv: Array2<f64>,
    pub b_qkv: Array1<f64>,
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
    pub ln2: LayerNorm,
    pub w_ff1: Array2<f64>,
    pub b_ff1: Array1<f64>,
    pub w_ff2: Array2<f64>,
    pub b_ff2: Array1<f64>,
}

pub(crate) struct TransformerCache {
    ln1: LayerNormCache,
    u1: Array2<f64>,
    qkv: Array2<f64>,
    probs: Vec<Array2<f64>>,
    heads_out: Array2<f64>,
    ln2: LayerNormCache,
    u2: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
}

impl TransformerLayer {
    pub fn zeros(d: usize, ffn: usize) -> Self {
        Self {
            ln1: LayerNorm::new(d),
            w_qkv: Array2::zeros((d, 3 * d)),
            b_qkv: Array1::zeros(3 * d),
            w_o: Array2::zeros((d, d)),
            b_o: Array1::zeros(d),
            ln2: LayerNorm::new(d),
            w_ff1: Array2::zeros((d, ffn)),
            b_ff1: Array1::zeros(ffn),
            w_ff2: Array2::zeros((ffn, d)),
            b_ff2: Array1::zeros(d),
        }
    }

    pub(crate) fn forward(
        &self,
        x: ArrayView2<f64>,
        heads: usize,
        act: Activation,
        eps: f64,
    ) -> (Array2<f64>, TransformerCache) {
        let d = x.ncols();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let (u1, ln1) = self.ln1.forward(x, eps);
        let qkv = affine(u1.view(), &self.w_qkv, &self.b_qkv);
        let mut heads_out = Array2::zeros(x.raw_dim());
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let q = qkv.slice(s![.., h * dh..(h + 1) * dh]);
            let k = qkv.slice(s![.., d + h * dh..d + (h + 1) * dh]);
            let v = qkv.slice(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]);
            let mut p = q.dot(&k.t()) * scale;
            softmax_rows(&mut p);
            heads_out
                .slice_mut(s![.., h * dh..(h + 1) * dh])
                .assign(&p.dot(&v));
            probs.push(p);
        }
        let mut h1 = affine(heads_out.view(), &self.w_o, &self.b_o);
        h1 += &x;

        let (u2, ln2) = self.ln2.forward(h1.view(), eps);
        let ff_pre = affine(u2.view(), &self.w_ff1, &self.b_ff1);
        let ff_act = ff_pre.mapv(|v| act.apply(v));
        let mut out = affine(ff_act.view(), &self.w_ff2, &self.b_ff2);
        out += &h1;

        let cache = TransformerCache {
            ln1,
            u1,
            qkv,
            probs,
            heads_out,
            ln2,
            u2,
            ff_pre,
            ff_act,
        };
        (out, cache)
    }

    pub(crate) fn backward(
        &self,
        cache: &TransformerCache,
        dout: Array2<f64>,
        heads: usize,
        act: Activation,
        grad: &mut TransformerLayer,
    ) -> Array2<f64> {
        let d = dout.ncols();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();

        // feed-forward branch
        add_at_b(&mut grad.w_ff2, cache.ff_act.view(), dout.view());
        add_col_sums(&mut grad.b_ff2, dout.view());
        let mut dpre = dout.dot(&self.w_ff2.t());
        dpre.zip_mut_with(&cache.ff_pre, |g, &p| *g *= act.derivative(p));
        add_at_b(&mut grad.w_ff1, cache.u2.view(), dpre.view());
        add_col_sums(&mut grad.b_ff1, dpre.view());
        let du2 = dpre.dot(&self.w_ff1.t());
        let mut dh1 = dout;
        dh1 += &self.ln2.backward(&cache.ln2, du2.view(), &mut grad.ln2);

        // attention branch
        add_at_b(&mut grad.w_o, cache.heads_out.view(), dh1.view());
        add_col_sums(&mut grad.b_o, dh1.view());
        let dheads = dh1.dot(&self.w_o.t());
        let mut dqkv = Array2::zeros(cache.qkv.raw_dim());
        for h in 0..heads {
            let q = cache.qkv.slice(s![.., h * dh..(h + 1) * dh]);
            let k = cache.qkv.slice(s![.., d + h * dh..d + (h + 1) * dh]);
            let v = cache.qkv.slice(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]);
            let p = &cache.probs[h];
            let dho = dheads.slice(s![.., h * dh..(h + 1) * dh]);
            let dp = dho.dot(&v.t());
            let dv = p.t().dot(&dho);
            let ds = softmax_rows_backward(p.view(), dp.view()) * scale;
            let dq = ds.dot(&k);
            let dk = ds.t().dot(&q);
            dqkv.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&dq);
            dqkv.slice_mut(s![.., d + h * dh..d + (h + 1) * dh])
                .assign(&dk);
            dqkv.slice_mut(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh])
                .assign(&dv);
        }
        add_at_b(&mut grad.w_qkv, cache.u1.view(), dqkv.view());
        add_col_sums(&mut grad.b_qkv, dqkv.view());
        let du1 = dqkv.dot(&self.w_qkv.t());
        let mut dx = dh1;
        dx += &self.ln1.backward(&cache.ln1, du1.view(), &mut grad.ln1);
        dx
    }
}

/// Sinusoidal position table, `n × d`.
pub fn sinusoidal_positions(n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |(pos, j)| {
        let i2 = (j / 2 * 2) as f64;
        let angle = pos as f64 / 10000f64.powf(i2 / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

//! Window encoder: per-group two-pathway temporal conv blocks, attention
//! fusion across feature groups, and a CLS-token transformer aggregator.
//!
//! For every feature group `k` and frame `t`
//!
//! ```text
//! e[k,t] = conv_static[k](s)[t] + conv_motion[k](u)[t]
//! α[·,t] = softmax_k(qᵀ W_a e[k,t] / √d)
//! f[t]   = Σ_k α[k,t] e[k,t]
//! ```
//!
//! then `[CLS, f_1..f_T] + PE` runs through the transformer and every output
//! row is L2-normalized. Row 0 is the window embedding, rows 1..=T are the
//! per-frame embeddings.

pub mod checkpoint;
pub mod nn;
pub mod transformer;

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    GLOBAL_ORIENT_DIM, GLOBAL_ORIENT_OFFSET, KEYPOINTS_DIM, KEYPOINTS_OFFSET,
    POSE_DIM, POSE_OFFSET, SHAPE_DIM, SHAPE_OFFSET, VISUAL_DIM, VISUAL_OFFSET,
};
use crate::windows::TemporalWindow;

pub use nn::{Activation, Conv1d, ConvBlock, LayerNorm};
pub use transformer::{sinusoidal_positions, TransformerLayer};

use nn::{l2_normalize_backward, l2_normalize_rows, ConvBlockCache};
use transformer::TransformerCache;

/// A contiguous slice of the flattened per-frame vector encoded by its own
/// pair of conv blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub offset: usize,
    pub dim: usize,
}

impl FeatureGroup {
    pub fn new(name: &str, offset: usize, dim: usize) -> Self {
        Self {
            name: name.to_string(),
            offset,
            dim,
        }
    }
}

/// Pose, global orientation, shape, keypoints and visual.
pub fn standard_groups() -> Vec<FeatureGroup> {
    vec![
        FeatureGroup::new("pose", POSE_OFFSET, POSE_DIM),
        FeatureGroup::new("global_orient", GLOBAL_ORIENT_OFFSET, GLOBAL_ORIENT_DIM),
        FeatureGroup::new("shape", SHAPE_OFFSET, SHAPE_DIM),
        FeatureGroup::new("keypoints", KEYPOINTS_OFFSET, KEYPOINTS_DIM),
        FeatureGroup::new("visual", VISUAL_OFFSET, VISUAL_DIM),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub kernel_size: usize,
    pub dilations: Vec<usize>,
    pub layers: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    pub window_len: usize,
    pub groups: Vec<FeatureGroup>,
    pub activation: Activation,
    /// Groups whose inputs are zeroed (feature ablation).
    pub masked_groups: Vec<String>,
    pub layer_norm_eps: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 256,
            kernel_size: 5,
            dilations: vec![1, 2, 4],
            layers: 4,
            heads: 8,
            ffn_mult: 4,
            window_len: 32,
            groups: standard_groups(),
            activation: Activation::Gelu,
            masked_groups: Vec::new(),
            layer_norm_eps: 1e-5,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(Error::Config(format!(
                "dilations must be positive, got {:?}",
                self.dilations
            )));
        }
        if self.groups.is_empty() {
            return Err(Error::Config("at least one feature group is required".into()));
        }
        if self.window_len == 0 || self.ffn_mult == 0 {
            return Err(Error::Config("window_len and ffn_mult must be positive".into()));
        }
        for g in &self.groups {
            if g.dim == 0 {
                return Err(Error::Config(format!("group `{}` has zero width", g.name)));
            }
        }
        for m in &self.masked_groups {
            if !self.groups.iter().any(|g| &g.name == m) {
                return Err(Error::Config(format!("masked group `{m}` does not exist")));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.groups.iter().map(|g| g.offset + g.dim).max().unwrap_or(0)
    }

    pub fn group_names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    fn is_masked(&self, group: &FeatureGroup) -> bool {
        self.masked_groups.iter().any(|m| m == &group.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupEncoder {
    pub static_block: ConvBlock,
    pub motion_block: ConvBlock,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fusion {
    pub query: Array1<f64>,
    pub w_a: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub groups: Vec<GroupEncoder>,
    pub fusion: Fusion,
    pub cls: Array1<f64>,
    pub layers: Vec<TransformerLayer>,
}

impl EncoderParams {
    /// All-zero parameters with the right shapes; also used as a gradient buffer.
    pub fn zeros(config: &EncoderConfig) -> Self {
        let d = config.d_model;
        let n_conv = config.dilations.len();
        let mut p = Self {
            groups: config
                .groups
                .iter()
                .map(|g| GroupEncoder {
                    static_block: ConvBlock::zeros(config.kernel_size, g.dim, d, n_conv),
                    motion_block: ConvBlock::zeros(config.kernel_size, g.dim, d, n_conv),
                })
                .collect(),
            fusion: Fusion {
                query: Array1::zeros(d),
                w_a: Array2::zeros((d, d)),
            },
            cls: Array1::zeros(d),
            layers: (0..config.layers)
                .map(|_| TransformerLayer::zeros(d, config.ffn_mult * d))
                .collect(),
        };
        for (_, mut t) in p.tensors_mut() {
            t.fill(0.0);
        }
        p
    }

    /// Seeded initialization: weights `U(−1/√fan_in, 1/√fan_in)`, biases zero,
    /// layer norms identity, CLS token `N(0, 0.02²)`.
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut uniform = |a: &mut Array2<f64>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            a.mapv_inplace(|_| rng.random_range(-bound..bound));
        };
        let k = config.kernel_size;
        let d = config.d_model;
        for (g, ge) in config.groups.iter().zip(p.groups.iter_mut()) {
            for block in [&mut ge.static_block, &mut ge.motion_block] {
                uniform(&mut block.proj, g.dim);
                for (i, layer) in block.layers.iter_mut().enumerate() {
                    let d_in = if i == 0 { g.dim } else { d };
                    uniform(&mut layer.weight, k * d_in);
                }
            }
        }
        uniform(&mut p.fusion.w_a, d);
        let mut q = p.fusion.query.clone().insert_axis(ndarray::Axis(0));
        uniform(&mut q, d);
        p.fusion.query = q.row(0).to_owned();
        for layer in p.layers.iter_mut() {
            layer.ln1 = LayerNorm::new(d);
            layer.ln2 = LayerNorm::new(d);
            uniform(&mut layer.w_qkv, d);
            uniform(&mut layer.w_o, d);
            uniform(&mut layer.w_ff1, d);
            uniform(&mut layer.w_ff2, config.ffn_mult * d);
        }
        let normal = Normal::new(0.0, 0.02).expect("valid normal");
        p.cls.mapv_inplace(|_| normal.sample(&mut rng));
        Ok(p)
    }

    /// Named views of every parameter tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (gi, g) in self.groups.iter().enumerate() {
            for (path, block) in [("static", &g.static_block), ("motion", &g.motion_block)] {
                let pre = format!("group{gi}.{path}");
                out.push((format!("{pre}.proj"), block.proj.view().into_dyn()));
                for (li, l) in block.layers.iter().enumerate() {
                    out.push((format!("{pre}.conv{li}.weight"), l.weight.view().into_dyn()));
                    out.push((format!("{pre}.conv{li}.bias"), l.bias.view().into_dyn()));
                }
            }
        }
        out.push(("fusion.query".into(), self.fusion.query.view().into_dyn()));
        out.push(("fusion.w_a".into(), self.fusion.w_a.view().into_dyn()));
        out.push(("cls".into(), self.cls.view().into_dyn()));
        for (li, l) in self.layers.iter().enumerate() {
            let pre = format!("layer{li}");
            out.push((format!("{pre}.ln1.gamma"), l.ln1.gamma.view().into_dyn()));
            out.push((format!("{pre}.ln1.beta"), l.ln1.beta.view().into_dyn()));
            out.push((format!("{pre}.w_qkv"), l.w_qkv.view().into_dyn()));
            out.push((format!("{pre}.b_qkv"), l.b_qkv.view().into_dyn()));
            out.push((format!("{pre}.w_o"), l.w_o.view().into_dyn()));
            out.push((format!("{pre}.b_o"), l.b_o.view().into_dyn()));
            out.push((format!("{pre}.ln2.gamma"), l.ln2.gamma.view().into_dyn()));
            out.push((format!("{pre}.ln2.beta"), l.ln2.beta.view().into_dyn()));
            out.push((format!("{pre}.w_ff1"), l.w_ff1.view().into_dyn()));
            out.push((format!("{pre}.b_ff1"), l.b_ff1.view().into_dyn()));
            out.push((format!("{pre}.w_ff2"), l.w_ff2.view().into_dyn()));
            out.push((format!("{pre}.b_ff2"), l.b_ff2.view().into_dyn()));
        }
        out
    }

    /// Mutable counterpart of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        for (gi, g) in self.groups.iter_mut().enumerate() {
            for (path, block) in [
                ("static", &mut g.static_block),
                ("motion", &mut g.motion_block),
            ] {
                let pre = format!("group{gi}.{path}");
                out.push((format!("{pre}.proj"), block.proj.view_mut().into_dyn()));
                for (li, l) in block.layers.iter_mut().enumerate() {
                    out.push((format!("{pre}.conv{li}.weight"), l.weight.view_mut().into_dyn()));
                    out.push((format!("{pre}.conv{li}.bias"), l.bias.view_mut().into_dyn()));
                }
            }
        }
        out.push(("fusion.query".into(), self.fusion.query.view_mut().into_dyn()));
        out.push(("fusion.w_a".into(), self.fusion.w_a.view_mut().into_dyn()));
        out.push(("cls".into(), self.cls.view_mut().into_dyn()));
        for (li, l) in self.layers.iter_mut().enumerate() {
            let pre = format!("layer{li}");
            out.push((format!("{pre}.ln1.gamma"), l.ln1.gamma.view_mut().into_dyn()));
            out.push((format!("{pre}.ln1.beta"), l.ln1.beta.view_mut().into_dyn()));
            out.push((format!("{pre}.w_qkv"), l.w_qkv.view_mut().into_dyn()));
            out.push((format!("{pre}.b_qkv"), l.b_qkv.view_mut().into_dyn()));
            out.push((format!("{pre}.w_o"), l.w_o.view_mut().into_dyn()));
            out.push((format!("{pre}.b_o"), l.b_o.view_mut().into_dyn()));
            out.push((format!("{pre}.ln2.gamma"), l.ln2.gamma.view_mut().into_dyn()));
            out.push((format!("{pre}.ln2.beta"), l.ln2.beta.view_mut().into_dyn()));
            out.push((format!("{pre}.w_ff1"), l.w_ff1.view_mut().into_dyn()));
            out.push((format!("{pre}.b_ff1"), l.b_ff1.view_mut().into_dyn()));
            out.push((format!("{pre}.w_ff2"), l.w_ff2.view_mut().into_dyn()));
            out.push((format!("{pre}.b_ff2"), l.b_ff2.view_mut().into_dyn()));
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &EncoderParams) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, mut a) in self.tensors_mut() {
            a *= factor;
        }
    }
}

/// Unit-norm window embedding plus per-frame embeddings and fusion weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowEmbedding {
    pub z_cls: Array1<f64>,
    /// `T × d`, unit-norm rows.
    pub z_frames: Array2<f64>,
    /// `T × K` fusion weights, rows on the simplex.
    pub attention: Array2<f64>,
    pub video_id: String,
    pub start_frame: usize,
    pub label: Option<String>,
}

/// Borrowed encoder input: `T × D` normalized static and motion rows.
#[derive(Clone, Copy, Debug)]
pub struct WindowInput<'a> {
    pub static_feats: ArrayView2<'a, f64>,
    pub motion: ArrayView2<'a, f64>,
}

impl<'a> From<&'a TemporalWindow> for WindowInput<'a> {
    fn from(w: &'a TemporalWindow) -> Self {
        Self {
            static_feats: w.static_feats.view(),
            motion: w.motion.view(),
        }
    }
}

/// Runs one conv block on `T × D_in` input.
pub fn conv_block(
    x: ArrayView2<f64>,
    block: &ConvBlock,
    config: &EncoderConfig,
) -> Result<Array2<f64>> {
    if x.ncols() != block.proj.nrows() {
        return Err(Error::Shape(format!(
            "conv block expects {} input channels, got {}",
            block.proj.nrows(),
            x.ncols()
        )));
    }
    if block.layers.len() != config.dilations.len() {
        return Err(Error::Shape(format!(
            "conv block has {} layers but {} dilations are configured",
            block.layers.len(),
            config.dilations.len()
        )));
    }
    let (out, _) = block.forward(
        x,
        config.kernel_size,
        &config.dilations,
        config.activation,
        false,
    );
    Ok(out)
}

/// Attention-weighted sum of `K` per-group embeddings for one frame.
pub fn fuse(e: &[ArrayView1<f64>], query: ArrayView1<f64>, w_a: ArrayView2<f64>) -> (Array1<f64>, Vec<f64>) {
    let d = query.len();
    let v = w_a.t().dot(&query);
    let logits: Vec<f64> = e.iter().map(|ek| ek.dot(&v) / (d as f64).sqrt()).collect();
    let alpha = softmax(&logits);
    let mut f = Array1::zeros(d);
    for (ek, a) in e.iter().zip(&alpha) {
        f.scaled_add(*a, ek);
    }
    (f, alpha)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Prepends the CLS token, adds positions, runs the transformer and
/// normalizes. Returns `(z_cls, z_frames)`.
pub fn aggregate(
    frames: ArrayView2<f64>,
    params: &EncoderParams,
    config: &EncoderConfig,
) -> (Array1<f64>, Array2<f64>) {
    let (z, _, _) = aggregate_forward(frames, params, config);
    (z.row(0).to_owned(), z.slice(s![1.., ..]).to_owned())
}

fn aggregate_forward(
    frames: ArrayView2<f64>,
    params: &EncoderParams,
    config: &EncoderConfig,
) -> (Array2<f64>, Array1<f64>, Vec<TransformerCache>) {
    let (t, d) = frames.dim();
    let mut x = Array2::zeros((t + 1, d));
    x.row_mut(0).assign(&params.cls);
    x.slice_mut(s![1.., ..]).assign(&frames);
    x += &sinusoidal_positions(t + 1, d);
    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (out, cache) = layer.forward(
            x.view(),
            config.heads,
            config.activation,
            config.layer_norm_eps,
        );
        caches.push(cache);
        x = out;
    }
    let (z, norms) = l2_normalize_rows(x.view());
    (z, norms, caches)
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct ForwardCache {
    blocks: Vec<Option<(ConvBlockCache, ConvBlockCache)>>,
    group_emb: Vec<Array2<f64>>,
    alpha: Array2<f64>,
    z: Array2<f64>,
    norms: Array1<f64>,
    layers: Vec<TransformerCache>,
}

fn check_input(input: &WindowInput, config: &EncoderConfig) -> Result<()> {
    let (t, width) = input.static_feats.dim();
    if input.motion.dim() != (t, width) {
        return Err(Error::Shape(format!(
            "static rows are {:?} but motion rows are {:?}",
            input.static_feats.dim(),
            input.motion.dim()
        )));
    }
    if t == 0 {
        return Err(Error::Shape("window has no frames".into()));
    }
    let bad: Vec<&str> = config
        .groups
        .iter()
        .filter(|g| g.offset + g.dim > width)
        .map(|g| g.name.as_str())
        .collect();
    if !bad.is_empty() {
        return Err(Error::Shape(format!(
            "input has {width} columns, too few for group(s): {}",
            bad.join(", ")
        )));
    }
    Ok(())
}

pub(crate) fn forward(
    input: WindowInput,
    params: &EncoderParams,
    config: &EncoderConfig,
    keep_cache: bool,
) -> Result<(Array2<f64>, Array2<f64>, Option<ForwardCache>)> {
    check_input(&input, config)?;
    let t = input.static_feats.nrows();
    let d = config.d_model;
    let k = config.groups.len();
    let mut blocks = Vec::with_capacity(k);
    let mut group_emb = Vec::with_capacity(k);
    for (g, ge) in config.groups.iter().zip(&params.groups) {
        let cols = s![.., g.offset..g.offset + g.dim];
        let masked = config.is_masked(g);
        let zeros;
        let (sv, mv) = if masked {
            zeros = Array2::zeros((t, g.dim));
            (zeros.view(), zeros.view())
        } else {
            (input.static_feats.slice(cols), input.motion.slice(cols))
        };
        let run = |block: &ConvBlock, x: ArrayView2<f64>| {
            block.forward(
                x,
                config.kernel_size,
                &config.dilations,
                config.activation,
                keep_cache,
            )
        };
        let (es, cs) = run(&ge.static_block, sv);
        let (em, cm) = run(&ge.motion_block, mv);
        group_emb.push(es + em);
        blocks.push(cs.zip(cm));
    }

    // fusion, vectorized over frames
    let v = params.fusion.w_a.t().dot(&params.fusion.query);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut alpha = Array2::zeros((t, k));
    for (gi, e) in group_emb.iter().enumerate() {
        alpha.column_mut(gi).assign(&(e.dot(&v) * inv_sqrt_d));
    }
    nn::softmax_rows(&mut alpha);
    let mut fused = Array2::zeros((t, d));
    for (gi, e) in group_emb.iter().enumerate() {
        let a = alpha.column(gi).insert_axis(ndarray::Axis(1));
        fused += &(e * &a);
    }

    let (z, norms, layers) = aggregate_forward(fused.view(), params, config);
    let cache = keep_cache.then(|| ForwardCache {
        blocks,
        group_emb,
        alpha: alpha.clone(),
        z: z.clone(),
        norms,
        layers,
    });
    Ok((z, alpha, cache))
}

/// Accumulates `∂L/∂params` into `grads` given gradients w.r.t. the window
/// embedding and (optionally) the frame embeddings.
pub(crate) fn backward(
    params: &EncoderParams,
    config: &EncoderConfig,
    cache: &ForwardCache,
    dz_cls: ArrayView1<f64>,
    dz_frames: Option<ArrayView2<f64>>,
    grads: &mut EncoderParams,
) {
    let n = cache.z.nrows();
    let d = config.d_model;
    let mut dx = Array2::zeros((n, d));
    dx.row_mut(0)
        .assign(&l2_normalize_backward(cache.z.row(0), cache.norms[0], dz_cls));
    if let Some(dzf) = dz_frames {
        for r in 1..n {
            dx.row_mut(r).assign(&l2_normalize_backward(
                cache.z.row(r),
                cache.norms[r],
                dzf.row(r - 1),
            ));
        }
    }
    for (li, layer) in params.layers.iter().enumerate().rev() {
        dx = layer.backward(
            &cache.layers[li],
            dx,
            config.heads,
            config.activation,
            &mut grads.layers[li],
        );
    }
    grads.cls += &dx.row(0);
    let dfused = dx.slice(s![1.., ..]);

    // fusion backward
    let k = cache.group_emb.len();
    let v = params.fusion.w_a.t().dot(&params.fusion.query);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut dalpha = Array2::zeros(cache.alpha.raw_dim());
    for (gi, e) in cache.group_emb.iter().enumerate() {
        let col: Array1<f64> = e
            .outer_iter()
            .zip(dfused.outer_iter())
            .map(|(er, dr)| er.dot(&dr))
            .collect();
        dalpha.column_mut(gi).assign(&col);
    }
    let dlogits = nn::softmax_rows_backward(cache.alpha.view(), dalpha.view());
    let mut dv = Array1::zeros(d);
    for gi in 0..k {
        let e = &cache.group_emb[gi];
        let a = cache.alpha.column(gi).insert_axis(ndarray::Axis(1));
        let dl = dlogits.column(gi);
        let mut de = &dfused * &a;
        let dl2 = dl.insert_axis(ndarray::Axis(1));
        de += &(&dl2 * &v.view().insert_axis(ndarray::Axis(0)) * inv_sqrt_d);
        dv += &(e.t().dot(&dl) * inv_sqrt_d);

        if let Some((cs, cm)) = &cache.blocks[gi] {
            let ge = &params.groups[gi];
            let gg = &mut grads.groups[gi];
            ge.static_block.backward(
                cs,
                de.clone(),
                config.kernel_size,
                &config.dilations,
                config.activation,
                &mut gg.static_block,
            );
            ge.motion_block.backward(
                cm,
                de,
                config.kernel_size,
                &config.dilations,
                config.activation,
                &mut gg.motion_block,
            );
        }
    }
    // v = W_aᵀ q
    let q = &params.fusion.query;
    grads.fusion.w_a += &(q
        .view()
        .insert_axis(ndarray::Axis(1))
        .dot(&dv.view().insert_axis(ndarray::Axis(0))));
    grads.fusion.query += &params.fusion.w_a.dot(&dv);
}

pub fn encode_input(
    input: WindowInput,
    params: &EncoderParams,
    config: &EncoderConfig,
) -> Result<(Array1<f64>, Array2<f64>, Array2<f64>)> {
    let (z, alpha, _) = forward(input, params, config, false)?;
    Ok((z.row(0).to_owned(), z.slice(s![1.., ..]).to_owned(), alpha))
}

pub fn encode_window(
    window: &TemporalWindow,
    params: &EncoderParams,
    config: &EncoderConfig,
) -> Result<WindowEmbedding> {
    let (z_cls, z_frames, attention) = encode_input(window.into(), params, config)?;
    Ok(WindowEmbedding {
        z_cls,
        z_frames,
        attention,
        video_id: window.video_id.clone(),
        start_frame: window.start_frame,
        label: window.label.clone(),
    })
}

/// Mean fusion weight per feature group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub groups: Vec<String>,
    pub overall: Vec<f64>,
    pub per_class: BTreeMap<String, Vec<f64>>,
    pub frames: usize,
}

pub fn attention_report(
    windows: &[TemporalWindow],
    params: &EncoderParams,
    config: &EncoderConfig,
) -> Result<AttentionReport> {
    if windows.is_empty() {
        return Err(Error::InvalidInput("attention report needs at least one window".into()));
    }
    let embeddings = windows
        .iter()
        .map(|w| encode_window(w, params, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(attention_report_from(&embeddings, config))
}

pub fn attention_report_from(
    embeddings: &[WindowEmbedding],
    config: &EncoderConfig,
) -> AttentionReport {
    let k = config.groups.len();
    let mut overall = vec![0.0; k];
    let mut frames = 0usize;
    let mut per_class: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for e in embeddings {
        for row in e.attention.outer_iter() {
            for (acc, a) in overall.iter_mut().zip(row) {
                *acc += a;
            }
            frames += 1;
            if let Some(label) = &e.label {
                let entry = per_class
                    .entry(label.clone())
                    .or_insert_with(|| (vec![0.0; k], 0));
                for (acc, a) in entry.0.iter_mut().zip(row) {
                    *acc += a;
                }
                entry.1 += 1;
            }
        }
    }
    overall.iter_mut().for_each(|v| *v /= frames as f64);
    AttentionReport {
        groups: config.group_names(),
        overall,
        per_class: per_class
            .into_iter()
            .map(|(c, (sum, n))| (c, sum.into_iter().map(|v| v / n as f64).collect()))
            .collect(),
        frames,
    }
}

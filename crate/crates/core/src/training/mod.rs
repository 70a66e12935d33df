//! Contrastive training of the window encoder: supervised contrastive loss on
//! clean windows plus a hard-negative term on procedurally distorted copies,
//! optimized with AdamW under a cosine schedule.

pub mod losses;
pub mod optim;

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    backward, encode_window, forward, EncoderConfig, EncoderParams, WindowEmbedding,
};
use crate::error::{Error, Result};
use crate::metrics::{s_cons, window_nmi, ClassCentroids};
use crate::windows::{distort, DistortionKind, DistortionSpec, TemporalWindow};

pub use losses::{
    choose_positives, hard_negative_loss, supcon_loss, total_loss, HardNegativeOutput, LossOutput,
};
pub use optim::{cosine_lr, AdamW};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight of the hard-negative term.
    pub lambda: f64,
    pub temperature: f64,
    /// Weight of the supervised contrastive term; 0 trains on the
    /// hard-negative objective alone.
    pub supcon_weight: f64,
    pub severity_range: [f64; 2],
    pub distorted_per_anchor: usize,
    pub masked_groups: Vec<String>,
    pub seed: u64,
    /// Evaluate validation NMI every this many epochs (0 = never). The final
    /// epoch is always evaluated when validation windows are given.
    pub val_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            weight_decay: 1e-4,
            batch_size: 32,
            epochs: 30,
            lambda: 10.0,
            temperature: 0.07,
            supcon_weight: 1.0,
            severity_range: [0.3, 1.0],
            distorted_per_anchor: 1,
            masked_groups: Vec::new(),
            seed: 0,
            val_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be ≥ 0, got {}", self.lambda));
        }
        if !(self.supcon_weight >= 0.0 && self.supcon_weight.is_finite()) {
            return bad(format!("supcon_weight must be ≥ 0, got {}", self.supcon_weight));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        let [lo, hi] = self.severity_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return bad(format!("severity range [{lo}, {hi}] must lie within [0, 1]"));
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning rate must be > 0 and weight decay ≥ 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub total: Vec<f64>,
    pub supcon: Vec<f64>,
    pub hard_negative: Vec<f64>,
    /// Learning rate used by the last step of each epoch.
    pub learning_rate: Vec<f64>,
    pub val_nmi: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct HistoryRow {
    epoch: usize,
    total: f64,
    supcon: f64,
    hard_negative: f64,
    learning_rate: f64,
    val_nmi: Option<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.total.len()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        for i in 0..self.epochs() {
            w.serialize(HistoryRow {
                epoch: i + 1,
                total: self.total[i],
                supcon: self.supcon[i],
                hard_negative: self.hard_negative[i],
                learning_rate: self.learning_rate[i],
                val_nmi: self.val_nmi[i],
            })
            .map_err(|e| Error::format(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    /// Encoder configuration with the training-time masked groups applied.
    pub encoder: EncoderConfig,
    pub params: EncoderParams,
    pub history: TrainHistory,
}

/// Clean anchors, their chosen positives, and distorted negatives.
#[derive(Clone, Debug)]
pub struct TrainingBatch {
    pub clean: Vec<TemporalWindow>,
    pub labels: Vec<usize>,
    pub positives: Vec<Option<usize>>,
    pub distorted: Vec<TemporalWindow>,
    /// Index into `clean` of the anchor each distorted window came from.
    pub owners: Vec<usize>,
}

impl TrainingBatch {
    /// Draws `distorted_per_anchor` variants per window (kind uniform over
    /// shuffle/reverse/copy, severity uniform in the configured range) and one
    /// same-class positive per anchor.
    pub fn assemble<R: Rng + ?Sized>(
        clean: Vec<TemporalWindow>,
        labels: Vec<usize>,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Self {
        let [lo, hi] = config.severity_range;
        let mut distorted = Vec::with_capacity(clean.len() * config.distorted_per_anchor);
        let mut owners = Vec::with_capacity(distorted.capacity());
        for (i, w) in clean.iter().enumerate() {
            for _ in 0..config.distorted_per_anchor {
                let kind = DistortionKind::ALL[rng.random_range(0..DistortionKind::ALL.len())];
                let severity = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                let spec = DistortionSpec::new(kind, severity, rng.random());
                distorted.push(distort(w, &spec));
                owners.push(i);
            }
        }
        let positives = choose_positives(&labels, rng);
        Self {
            clean,
            labels,
            positives,
            distorted,
            owners,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub supcon: f64,
    pub hard_negative: f64,
}

fn stack_cls(z: &[Array2<f64>], d: usize) -> Array2<f64> {
    let mut out = Array2::zeros((z.len(), d));
    for (i, zi) in z.iter().enumerate() {
        out.row_mut(i).assign(&zi.row(0));
    }
    out
}

/// Evaluates `supcon_weight · L_supcon + λ · L_hard-negative` on a batch and,
/// when `with_grad` is set, its gradient with respect to every parameter.
pub fn objective(
    batch: &TrainingBatch,
    params: &EncoderParams,
    encoder: &EncoderConfig,
    config: &TrainConfig,
    with_grad: bool,
) -> Result<(LossBreakdown, Option<EncoderParams>)> {
    let d = encoder.d_model;
    let run = |windows: &[TemporalWindow]| -> Result<(Vec<Array2<f64>>, Vec<_>)> {
        let mut zs = Vec::with_capacity(windows.len());
        let mut caches = Vec::with_capacity(windows.len());
        for w in windows {
            let (z, _, cache) = forward(w.into(), params, encoder, with_grad)?;
            zs.push(z);
            caches.push(cache);
        }
        Ok((zs, caches))
    };
    let (z_clean, c_clean) = run(&batch.clean)?;
    let (z_dist, c_dist) = run(&batch.distorted)?;
    let zc = stack_cls(&z_clean, d);
    let zd = stack_cls(&z_dist, d);

    let sc = supcon_loss(zc.view(), &batch.labels, config.temperature)?;
    let hn = hard_negative_loss(
        zc.view(),
        &batch.positives,
        zd.view(),
        &batch.owners,
        config.temperature,
    )?;
    let breakdown = LossBreakdown {
        total: config.supcon_weight * sc.value + config.lambda * hn.value,
        supcon: sc.value,
        hard_negative: hn.value,
    };
    if !with_grad {
        return Ok((breakdown, None));
    }

    let mut grads = EncoderParams::zeros(encoder);
    let dz_clean = sc.grad * config.supcon_weight + hn.grad_clean * config.lambda;
    let dz_dist = hn.grad_distorted * config.lambda;
    for (dz, caches) in [(&dz_clean, &c_clean), (&dz_dist, &c_dist)] {
        for (i, cache) in caches.iter().enumerate() {
            let row = dz.row(i);
            if row.iter().all(|v| *v == 0.0) {
                continue;
            }
            let cache = cache.as_ref().expect("forward ran with caches");
            backward(params, encoder, cache, row, None, &mut grads);
        }
    }
    Ok((breakdown, Some(grads)))
}

/// Splits `n` shuffled items into batches of `size`, folding a trailing
/// singleton into the previous batch so every batch has at least two rows.
fn batch_ranges(n: usize, size: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n)
        .step_by(size)
        .map(|s| (s, (s + size).min(n)))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|(a, b)| b - a < 2) {
        let (_, end) = out.pop().unwrap();
        out.last_mut().unwrap().1 = end;
    }
    out
}

/// Dense class indices in label order, plus the label → index map.
pub fn label_indices(windows: &[TemporalWindow]) -> Result<(Vec<usize>, BTreeMap<String, usize>)> {
    let mut classes = BTreeMap::new();
    for w in windows {
        let label = w.label.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!(
                "training window {}@{} has no action label",
                w.video_id, w.start_frame
            ))
        })?;
        let next = classes.len();
        classes.entry(label.clone()).or_insert(next);
    }
    let ids = windows
        .iter()
        .map(|w| classes[w.label.as_ref().unwrap()])
        .collect();
    Ok((ids, classes))
}

/// Trains a freshly initialized encoder. Deterministic given both seeds
/// (`encoder.seed` for initialization, `config.seed` for batching and
/// distortions).
pub fn train(
    train_windows: &[TemporalWindow],
    val_windows: &[TemporalWindow],
    encoder: &EncoderConfig,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let mut encoder = encoder.clone();
    for g in &config.masked_groups {
        if !encoder.groups.iter().any(|fg| &fg.name == g) {
            return Err(Error::Config(format!("cannot mask unknown feature group `{g}`")));
        }
        if !encoder.masked_groups.contains(g) {
            encoder.masked_groups.push(g.clone());
        }
    }
    encoder.validate()?;
    let (labels, classes) = label_indices(train_windows)?;
    if classes.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least two action classes, found {}",
            classes.len()
        )));
    }

    let mut params = EncoderParams::init(&encoder)?;
    let mut opt = AdamW::new(&encoder, config.learning_rate, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps_per_epoch = batch_ranges(train_windows.len(), config.batch_size).len();
    let t_max = steps_per_epoch * config.epochs;
    let mut history = TrainHistory::default();
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..train_windows.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = LossBreakdown::default();
        let mut lr = config.learning_rate;
        let ranges = batch_ranges(order.len(), config.batch_size);
        for &(a, b) in &ranges {
            let idx = &order[a..b];
            let batch = TrainingBatch::assemble(
                idx.iter().map(|&i| train_windows[i].clone()).collect(),
                idx.iter().map(|&i| labels[i]).collect(),
                config,
                &mut rng,
            );
            let (loss, grads) = objective(&batch, &params, &encoder, config, true)?;
            lr = cosine_lr(config.learning_rate, step, t_max);
            opt.step(&mut params, &grads.expect("gradient requested"), lr);
            if !params.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "parameters became non-finite at epoch {} step {step}",
                    epoch + 1
                )));
            }
            sums.total += loss.total;
            sums.supcon += loss.supcon;
            sums.hard_negative += loss.hard_negative;
            step += 1;
        }
        let nb = ranges.len() as f64;
        history.total.push(sums.total / nb);
        history.supcon.push(sums.supcon / nb);
        history.hard_negative.push(sums.hard_negative / nb);
        history.learning_rate.push(lr);

        let is_last = epoch + 1 == config.epochs;
        let due = config.val_every > 0 && (epoch + 1) % config.val_every == 0;
        let val_nmi = if !val_windows.is_empty() && (due || is_last) {
            let emb = val_windows
                .iter()
                .map(|w| encode_window(w, &params, &encoder))
                .collect::<Result<Vec<_>>>()?;
            Some(window_nmi(&emb, config.seed)?)
        } else {
            None
        };
        history.val_nmi.push(val_nmi);
        info!(
            "epoch {}/{}: loss {:.4} (supcon {:.4}, hard-negative {:.4}), lr {:.2e}{}",
            epoch + 1,
            config.epochs,
            history.total[epoch],
            history.supcon[epoch],
            history.hard_negative[epoch],
            lr,
            val_nmi.map_or(String::new(), |v| format!(", val NMI {v:.3}"))
        );
    }
    Ok(TrainedModel {
        encoder,
        params,
        history,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedWindow {
    /// Position of the window in the candidate list.
    pub index: usize,
    pub distance: f64,
}

/// Ranks already-embedded candidates by distance to their class centroid and
/// keeps the closest `⌈keep_fraction · N⌉`. Ties go to the earlier
/// `(video_id, start_frame)`.
pub fn rank_by_centroid_distance(
    embeddings: &[WindowEmbedding],
    centroids: &ClassCentroids,
    keep_fraction: f64,
) -> Result<Vec<RankedWindow>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "keep fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let mut ranked = Vec::with_capacity(embeddings.len());
    for (index, e) in embeddings.iter().enumerate() {
        let label = e.label.as_deref().ok_or_else(|| {
            Error::InvalidInput(format!(
                "candidate window {}@{} has no action label",
                e.video_id, e.start_frame
            ))
        })?;
        let distance = s_cons(e.z_cls.view(), centroids.get(label)?.view())?;
        ranked.push(RankedWindow { index, distance });
    }
    ranked.sort_by(|a, b| {
        let (ea, eb) = (&embeddings[a.index], &embeddings[b.index]);
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| ea.video_id.cmp(&eb.video_id))
            .then_with(|| ea.start_frame.cmp(&eb.start_frame))
    });
    let keep = ((keep_fraction * embeddings.len() as f64) - 1e-9).ceil() as usize;
    ranked.truncate(keep.min(embeddings.len()));
    Ok(ranked)
}

/// Keeps the candidate windows most representative of their class.
pub fn active_sample(
    candidates: &[TemporalWindow],
    params: &EncoderParams,
    encoder: &EncoderConfig,
    centroids: &ClassCentroids,
    keep_fraction: f64,
) -> Result<Vec<RankedWindow>> {
    let embeddings = candidates
        .iter()
        .map(|w| encode_window(w, params, encoder))
        .collect::<Result<Vec<_>>>()?;
    rank_by_centroid_distance(&embeddings, centroids, keep_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::FeatureGroup;
    use crate::features::{NormStats, FRAME_DIM};
    use ndarray::{array, Array1};
    use std::sync::Arc;

    fn tiny_encoder() -> EncoderConfig {
        EncoderConfig {
            d_model: 8,
            layers: 1,
            heads: 2,
            window_len: 4,
            dilations: vec![1, 2],
            kernel_size: 3,
            groups: vec![FeatureGroup::new("a", 0, 3), FeatureGroup::new("b", 3, 2)],
            seed: 3,
            ..EncoderConfig::default()
        }
    }

    fn toy_window(video: &str, label: &str, start: usize, offset: f64, seed: u64) -> TemporalWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // only the first five columns are read by the tiny encoder
        let stat = Array2::from_shape_fn((4, FRAME_DIM), |(t, j)| {
            if j < 5 {
                offset * (j as f64 - 2.0) + 0.3 * (t as f64) + rng.random_range(-0.2..0.2)
            } else {
                0.0
            }
        });
        TemporalWindow::from_static(stat, Arc::new(NormStats::identity()), video, start, 0, Some(label.into()))
    }

    fn toy_windows() -> Vec<TemporalWindow> {
        (0..12)
            .map(|i| {
                let (label, off) = if i % 2 == 0 { ("x", 1.0) } else { ("y", -1.0) };
                toy_window(&format!("v{i}"), label, 0, off, i as u64)
            })
            .collect()
    }

    #[test]
    fn batch_ranges_cover_without_singletons() {
        assert_eq!(batch_ranges(10, 4), vec![(0, 4), (4, 8), (8, 10)]);
        assert_eq!(batch_ranges(9, 4), vec![(0, 4), (4, 9)]);
        assert_eq!(batch_ranges(3, 32), vec![(0, 3)]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { lambda: -1.0, ..Default::default() },
            TrainConfig { temperature: 0.0, ..Default::default() },
            TrainConfig { severity_range: [0.5, 1.2], ..Default::default() },
            TrainConfig { severity_range: [0.8, 0.3], ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let ws: Vec<_> = (0..4).map(|i| toy_window("v", "x", i, 1.0, i as u64)).collect();
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        assert!(matches!(train(&ws, &[], &tiny_encoder(), &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn objective_at_zero_lambda_is_supcon() {
        let enc = tiny_encoder();
        let params = EncoderParams::init(&enc).unwrap();
        let ws = toy_windows();
        let labels = label_indices(&ws).unwrap().0;
        let cfg = TrainConfig { lambda: 0.0, ..Default::default() };
        let batch = TrainingBatch::assemble(ws, labels, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let (loss, _) = objective(&batch, &params, &enc, &cfg, false).unwrap();
        assert_eq!(loss.total, loss.supcon);
        assert!(loss.hard_negative > 0.0);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let enc = tiny_encoder();
        let params = EncoderParams::init(&enc).unwrap();
        let ws: Vec<_> = toy_windows().into_iter().take(6).collect();
        let labels = label_indices(&ws).unwrap().0;
        let cfg = TrainConfig { temperature: 0.5, ..Default::default() };
        let batch = TrainingBatch::assemble(ws, labels, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let (_, grads) = objective(&batch, &params, &enc, &cfg, true).unwrap();
        let grads = grads.unwrap();
        let h = 1e-5;
        let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
        for (ti, name) in names.iter().enumerate() {
            let analytic: Vec<f64> = grads.tensors()[ti].1.iter().copied().collect();
            // a handful of coordinates per tensor keeps this fast
            let len = analytic.len();
            for &j in &[0, len / 2, len - 1] {
                let eval = |delta: f64| {
                    let mut p = params.clone();
                    let mut tensors = p.tensors_mut();
                    *tensors[ti].1.iter_mut().nth(j).unwrap() += delta;
                    drop(tensors);
                    objective(&batch, &p, &enc, &cfg, false).unwrap().0.total
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let err = (numeric - analytic[j]).abs();
                assert!(
                    err <= 1e-6 + 1e-4 * numeric.abs().max(analytic[j].abs()),
                    "{name}[{j}]: numeric {numeric} analytic {}",
                    analytic[j]
                );
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let enc = tiny_encoder();
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 6,
            learning_rate: 3e-3,
            seed: 11,
            ..Default::default()
        };
        let ws = toy_windows();
        let a = train(&ws, &ws, &enc, &cfg).unwrap();
        let b = train(&ws, &ws, &enc, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.epochs(), 6);
        assert_eq!(a.history.val_nmi.iter().filter(|v| v.is_some()).count(), 1);
        assert!(a.history.total.last().unwrap() < &a.history.total[0]);
    }

    #[test]
    fn history_csv_has_one_row_per_epoch() {
        let h = TrainHistory {
            total: vec![2.0, 1.0],
            supcon: vec![1.0, 0.5],
            hard_negative: vec![0.1, 0.05],
            learning_rate: vec![3e-4, 0.0],
            val_nmi: vec![None, Some(0.9)],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        h.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "epoch,total,supcon,hard_negative,learning_rate,val_nmi");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",0.9"));
    }

    fn emb(video: &str, start: usize, label: &str, z: Array1<f64>) -> WindowEmbedding {
        WindowEmbedding {
            z_cls: z,
            z_frames: Array2::zeros((2, 2)),
            attention: Array2::zeros((2, 1)),
            video_id: video.into(),
            start_frame: start,
            label: Some(label.into()),
        }
    }

    fn centroids() -> ClassCentroids {
        ClassCentroids {
            centroids: [("a".to_string(), array![0.0, 0.0]), ("b".to_string(), array![1.0, 0.0])]
                .into_iter()
                .collect(),
            counts: [("a".to_string(), 1), ("b".to_string(), 1)].into_iter().collect(),
        }
    }

    #[test]
    fn active_sample_keeps_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let embs: Vec<_> = (0..10)
            .map(|i| {
                let label = if i % 3 == 0 { "b" } else { "a" };
                emb(&format!("v{i}"), 0, label, array![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            })
            .collect();
        let c = centroids();
        let got = rank_by_centroid_distance(&embs, &c, 0.2).unwrap();
        // brute-force oracle
        let mut d: Vec<(f64, usize)> = embs
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let cen = &c.centroids[e.label.as_ref().unwrap()];
                (((&e.z_cls - cen).mapv(|v| v * v).sum()).sqrt(), i)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(got.len(), 2);
        assert_eq!(got.iter().map(|r| r.index).collect::<Vec<_>>(), vec![d[0].1, d[1].1]);

        let all = rank_by_centroid_distance(&embs, &c, 1.0).unwrap();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn active_sample_ties_follow_provenance() {
        let embs = vec![
            emb("v2", 0, "a", array![1.0, 0.0]),
            emb("v1", 24, "a", array![0.0, 1.0]),
            emb("v1", 0, "a", array![-1.0, 0.0]),
            emb("v0", 48, "a", array![0.0, -1.0]),
            emb("v3", 0, "a", array![1.0, 0.0]),
        ];
        let got = rank_by_centroid_distance(&embs, &centroids(), 0.4).unwrap();
        assert_eq!(got.iter().map(|r| r.index).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn active_sample_errors() {
        let embs = vec![emb("v", 0, "zzz", array![1.0, 0.0])];
        assert!(matches!(
            rank_by_centroid_distance(&embs, &centroids(), 0.5),
            Err(Error::MissingCentroid(l)) if l == "zzz"
        ));
        assert!(rank_by_centroid_distance(&embs, &centroids(), 0.0).is_err());
        assert!(rank_by_centroid_distance(&embs, &centroids(), 1.5).is_err());
    }
}

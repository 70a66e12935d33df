//! Action Consistency, Temporal Coherence and embedding-space clustering quality.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode_window, EncoderConfig, EncoderParams, WindowEmbedding};
use crate::error::{Error, Result};
use crate::features::PreparedSequence;
use crate::windows::make_windows;

pub const CENTROIDS_VERSION: u32 = 1;

/// Per-class mean of window embeddings (not re-normalized).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCentroids {
    pub centroids: BTreeMap<String, Array1<f64>>,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CentroidFile {
    format_version: u32,
    dim: usize,
    classes: Vec<CentroidEntry>,
}

#[derive(Serialize, Deserialize)]
struct CentroidEntry {
    label: String,
    count: usize,
    centroid: Vec<f64>,
}

impl ClassCentroids {
    pub fn get(&self, label: &str) -> Result<&Array1<f64>> {
        self.centroids
            .get(label)
            .ok_or_else(|| Error::MissingCentroid(label.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.centroids.values().next().map_or(0, |c| c.len())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CentroidFile {
            format_version: CENTROIDS_VERSION,
            dim: self.dim(),
            classes: self
                .centroids
                .iter()
                .map(|(label, c)| CentroidEntry {
                    label: label.clone(),
                    count: self.counts[label],
                    centroid: c.to_vec(),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::format(path, e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CentroidFile =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if file.format_version != CENTROIDS_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported centroid file version {}", file.format_version),
            ));
        }
        let mut out = ClassCentroids {
            centroids: BTreeMap::new(),
            counts: BTreeMap::new(),
        };
        for c in file.classes {
            if c.centroid.len() != file.dim || c.count == 0 {
                return Err(Error::format(path, format!("bad entry for class `{}`", c.label)));
            }
            out.counts.insert(c.label.clone(), c.count);
            out.centroids.insert(c.label, Array1::from(c.centroid));
        }
        Ok(out)
    }
}

/// Averages the window embeddings of every class.
pub fn compute_centroids<'a>(
    embeddings: impl IntoIterator<Item = (&'a str, ArrayView1<'a, f64>)>,
) -> Result<ClassCentroids> {
    let mut sums: BTreeMap<String, Array1<f64>> = BTreeMap::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (label, z) in embeddings {
        match sums.get_mut(label) {
            Some(acc) => {
                if acc.len() != z.len() {
                    return Err(Error::Shape(format!(
                        "class `{label}` mixes {}-d and {}-d embeddings",
                        acc.len(),
                        z.len()
                    )));
                }
                *acc += &z;
            }
            None => {
                sums.insert(label.to_string(), z.to_owned());
            }
        }
        *counts.entry(label.to_string()).or_default() += 1;
    }
    if sums.is_empty() {
        return Err(Error::InvalidInput("no labeled embeddings to average".into()));
    }
    let centroids = sums
        .into_iter()
        .map(|(label, sum)| {
            let c = sum / counts[&label] as f64;
            if c.dot(&c).sqrt() < 1e-9 {
                warn!("centroid of class `{label}` is (numerically) the zero vector");
            }
            (label, c)
        })
        .collect();
    Ok(ClassCentroids { centroids, counts })
}

/// Centroids from labeled window embeddings; unlabeled windows are skipped.
pub fn centroids_from_windows(embeddings: &[WindowEmbedding]) -> Result<ClassCentroids> {
    compute_centroids(
        embeddings
            .iter()
            .filter_map(|e| e.label.as_deref().map(|l| (l, e.z_cls.view()))),
    )
}

#[derive(Clone, Debug)]
pub struct VideoEmbedding {
    pub video_id: String,
    pub label: Option<String>,
    pub windows: Vec<WindowEmbedding>,
    pub mean_cls: Array1<f64>,
}

pub fn mean_cls(windows: &[WindowEmbedding]) -> Result<Array1<f64>> {
    let first = windows
        .first()
        .ok_or_else(|| Error::InvalidInput("no windows to average".into()))?;
    let mut acc = Array1::zeros(first.z_cls.len());
    for w in windows {
        acc += &w.z_cls;
    }
    Ok(acc / windows.len() as f64)
}

/// Windows the sequence, encodes every window and averages the window embeddings.
pub fn embed_video(
    seq: &PreparedSequence,
    params: &EncoderParams,
    config: &EncoderConfig,
    window_len: usize,
    overlap: usize,
) -> Result<VideoEmbedding> {
    let windows = make_windows(seq, window_len, overlap)?
        .iter()
        .map(|w| encode_window(w, params, config))
        .collect::<Result<Vec<_>>>()?;
    let mean_cls = mean_cls(&windows)?;
    Ok(VideoEmbedding {
        video_id: seq.video_id.clone(),
        label: seq.label.clone(),
        windows,
        mean_cls,
    })
}

/// Action Consistency: `‖z_video − c_k‖₂` (lower is better).
pub fn s_cons(video_mean_cls: ArrayView1<f64>, centroid: ArrayView1<f64>) -> Result<f64> {
    if video_mean_cls.len() != centroid.len() {
        return Err(Error::Shape(format!(
            "embedding has {} dims but centroid has {}",
            video_mean_cls.len(),
            centroid.len()
        )));
    }
    Ok(video_mean_cls
        .iter()
        .zip(centroid)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Temporal Coherence of one window: mean consecutive-frame embedding distance.
pub fn s_temp_window(z_frames: ArrayView2<f64>) -> Result<f64> {
    let t = z_frames.nrows();
    if t < 2 {
        return Err(Error::InvalidInput(
            "temporal coherence needs at least two frames per window".into(),
        ));
    }
    let sum: f64 = (0..t - 1)
        .map(|i| {
            let a = z_frames.row(i);
            let b = z_frames.row(i + 1);
            a.iter().zip(b).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt()
        })
        .sum();
    Ok(sum / (t - 1) as f64)
}

/// Video-level Temporal Coherence: uniform mean over windows.
pub fn s_temp(windows: &[WindowEmbedding]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::InvalidInput("no windows to score".into()));
    }
    let mut total = 0.0;
    for w in windows {
        total += s_temp_window(w.z_frames.view())?;
    }
    Ok(total / windows.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video_id: String,
    pub label: String,
    pub s_cons: f64,
    pub s_temp: f64,
    pub n_windows: usize,
}

pub fn score_video(video: &VideoEmbedding, centroids: &ClassCentroids) -> Result<VideoScore> {
    let label = video.label.clone().ok_or_else(|| {
        Error::InvalidInput(format!("video `{}` has no action label", video.video_id))
    })?;
    let centroid = centroids.get(&label)?;
    Ok(VideoScore {
        video_id: video.video_id.clone(),
        s_cons: s_cons(video.mean_cls.view(), centroid.view())?,
        s_temp: s_temp(&video.windows)?,
        n_windows: video.windows.len(),
        label,
    })
}

/// Label of the nearest centroid (ties resolved by label order).
pub fn nearest_centroid(z: ArrayView1<f64>, centroids: &ClassCentroids) -> Option<String> {
    let mut best: Option<(f64, &String)> = None;
    for (label, c) in &centroids.centroids {
        let d = z.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, label));
        }
    }
    best.map(|(_, l)| l.clone())
}

/// Fraction of labeled embeddings whose nearest centroid carries their label.
pub fn nearest_centroid_accuracy(embeddings: &[WindowEmbedding], centroids: &ClassCentroids) -> f64 {
    let labeled: Vec<_> = embeddings.iter().filter(|e| e.label.is_some()).collect();
    if labeled.is_empty() {
        return f64::NAN;
    }
    let hits = labeled
        .iter()
        .filter(|e| nearest_centroid(e.z_cls.view(), centroids).as_deref() == e.label.as_deref())
        .count();
    hits as f64 / labeled.len() as f64
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centers: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn kmeans_plus_plus(points: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centers = Array2::zeros((k, points.ncols()));
    centers.row_mut(0).assign(&points.row(rng.random_range(0..n)));
    let mut closest: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, d) in closest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    centers
}

fn lloyd(points: ArrayView2<f64>, mut centers: Array2<f64>, max_iter: usize) -> KMeansResult {
    let (n, dim) = points.dim();
    let k = centers.nrows();
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let d = sq_dist(points.row(i), centers.row(c));
                if d < best.0 {
                    best = (d, c);
                }
            }
            if assignments[i] != best.1 {
                assignments[i] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            let mut row = sums.row_mut(a);
            row += &points.row(i);
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // re-seed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), centers.row(assignments[a]));
                        let db = sq_dist(points.row(b), centers.row(assignments[b]));
                        da.total_cmp(&db)
                    })
                    .unwrap();
                centers.row_mut(c).assign(&points.row(far));
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(assignments[i])))
        .sum();
    KMeansResult {
        assignments,
        centers,
        inertia,
    }
}

/// K-means with k-means++ seeding; the lowest-inertia of `restarts` runs wins.
pub fn kmeans(points: ArrayView2<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if points.nrows() < k {
        return Err(Error::InvalidInput(format!(
            "k-means with k = {k} needs at least {k} points, got {}",
            points.nrows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let init = kmeans_plus_plus(points, k, &mut rng);
        let run = lloyd(points, init, 300);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// NMI with arithmetic-mean normalization: `I(U;V) / ((H(U) + H(V)) / 2)`.
pub fn normalized_mutual_information<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "label vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("NMI of empty labelings".into()));
    }
    let n = a.len() as f64;
    let mut joint: BTreeMap<(&A, &B), usize> = BTreeMap::new();
    let mut ca: BTreeMap<&A, usize> = BTreeMap::new();
    let mut cb: BTreeMap<&B, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for ((x, y), &c) in &joint {
        let pxy = c as f64 / n;
        let px = ca[x] as f64 / n;
        let py = cb[y] as f64 / n;
        mi += pxy * (pxy / (px * py)).ln();
    }
    let denom = 0.5 * (ha + hb);
    Ok((mi / denom).clamp(0.0, 1.0))
}

pub const NMI_RESTARTS: usize = 10;

/// Clusters the embeddings with K-means and scores the clustering against labels.
pub fn nmi_eval<L: Ord>(embeddings: ArrayView2<f64>, labels: &[L], k: usize, seed: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidInput("NMI evaluation needs k ≥ 2".into()));
    }
    if labels.len() != embeddings.nrows() {
        return Err(Error::Shape("one label per embedding is required".into()));
    }
    let km = kmeans(embeddings, k, NMI_RESTARTS, seed)?;
    normalized_mutual_information(&km.assignments, labels)
}

/// Stacks the window embeddings of labeled windows and runs [`nmi_eval`] with
/// `k` equal to the number of distinct labels.
pub fn window_nmi(embeddings: &[WindowEmbedding], seed: u64) -> Result<f64> {
    let labeled: Vec<&WindowEmbedding> = embeddings.iter().filter(|e| e.label.is_some()).collect();
    let labels: Vec<&str> = labeled.iter().map(|e| e.label.as_deref().unwrap()).collect();
    let k = labels.iter().collect::<BTreeSet<_>>().len();
    let first = labeled
        .first()
        .ok_or_else(|| Error::InvalidInput("no labeled embeddings".into()))?;
    let mut m = Array2::zeros((labeled.len(), first.z_cls.len()));
    for (i, e) in labeled.iter().enumerate() {
        m.row_mut(i).assign(&e.z_cls);
    }
    nmi_eval(m.view(), &labels, k, seed)
}

//! Subjective-study statistics: rater screening (repeat consistency, BT.500,
//! inter-rater agreement), MOS and z-scores, plus the evaluation protocol
//! (Spearman correlation, win ratios, rater convergence, distortion sweeps).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode_window, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::metrics::{s_cons, s_temp_window, ClassCentroids};
use crate::windows::{distort, DistortionKind, DistortionSpec, TemporalWindow};

pub const SCORE_MIN: f64 = 0.0;
pub const SCORE_MAX: f64 = 10.0;
pub const DEFAULT_INTERRATER_THRESHOLD: f64 = 0.55;
pub const DEFAULT_REPEAT_PERCENTILE: f64 = 0.95;
pub const BT500_MIN_VIDEOS: usize = 10;

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's ρ with average ranks. Returns NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("spearman inputs differ in length ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("spearman needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("spearman inputs must be finite".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Spearman's ρ between two per-video score maps over their common videos.
pub fn correlate(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<(usize, f64)> {
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|(k, v)| b.get(k).map(|w| (*v, *w)))
        .unzip();
    Ok((x.len(), spearman(&x, &y)?))
}

/// Population mean and standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Linear-interpolation percentile (`q` in [0, 1]) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub model: Option<String>,
    pub prompt: Option<String>,
}

/// Sparse rater × video score table for one rating axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RaterTable {
    pub scores: BTreeMap<String, BTreeMap<String, f64>>,
    /// Group id → the video instances showing the same stimulus.
    pub duplicate_groups: BTreeMap<String, BTreeSet<String>>,
    pub metadata: BTreeMap<String, VideoMeta>,
}

#[derive(Debug, Deserialize)]
struct ScoreRecord {
    rater_id: String,
    video_id: String,
    axis: String,
    score: f64,
    #[serde(default)]
    is_duplicate_group: Option<String>,
}

#[derive(Debug, Deserialize)]
struct MetaRecord {
    video_id: String,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    prompt: Option<String>,
}

impl RaterTable {
    pub fn insert(&mut self, rater: &str, video: &str, score: f64) -> Result<()> {
        if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
            return Err(Error::InvalidInput(format!(
                "score {score} by `{rater}` for `{video}` is outside [{SCORE_MIN}, {SCORE_MAX}]"
            )));
        }
        self.scores
            .entry(rater.to_string())
            .or_default()
            .insert(video.to_string(), score);
        Ok(())
    }

    pub fn add_duplicate(&mut self, group: &str, video: &str) {
        self.duplicate_groups
            .entry(group.to_string())
            .or_default()
            .insert(video.to_string());
    }

    /// Loads the rows of `axis` (all rows when `None`). The
    /// `is_duplicate_group` column holds a group id; rows sharing a non-empty
    /// id are repeated presentations of one stimulus.
    pub fn from_csv(path: &Path, axis: Option<&str>) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let mut table = RaterTable::default();
        for rec in reader.deserialize::<ScoreRecord>() {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            if axis.is_some_and(|a| a != rec.axis) {
                continue;
            }
            table
                .insert(&rec.rater_id, &rec.video_id, rec.score)
                .map_err(|e| Error::format(path, e.to_string()))?;
            if let Some(g) = rec.is_duplicate_group.filter(|g| !g.is_empty()) {
                table.add_duplicate(&g, &rec.video_id);
            }
        }
        if table.scores.is_empty() {
            return Err(Error::format(path, "no ratings found"));
        }
        Ok(table)
    }

    /// Reads `video_id, model, prompt` metadata.
    pub fn load_metadata(&mut self, path: &Path) -> Result<()> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        for rec in reader.deserialize::<MetaRecord>() {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            self.metadata.insert(
                rec.video_id,
                VideoMeta {
                    model: rec.model,
                    prompt: rec.prompt,
                },
            );
        }
        Ok(())
    }

    pub fn raters(&self) -> BTreeSet<String> {
        self.scores.keys().cloned().collect()
    }

    pub fn videos(&self) -> BTreeSet<String> {
        self.scores.values().flat_map(|m| m.keys().cloned()).collect()
    }

    /// The table restricted to `raters`.
    pub fn restrict(&self, raters: &BTreeSet<String>) -> RaterTable {
        RaterTable {
            scores: self
                .scores
                .iter()
                .filter(|(r, _)| raters.contains(*r))
                .map(|(r, m)| (r.clone(), m.clone()))
                .collect(),
            duplicate_groups: self.duplicate_groups.clone(),
            metadata: self.metadata.clone(),
        }
    }

    /// Per-video scores in rater-id order.
    pub fn by_video(&self) -> BTreeMap<String, Vec<(String, f64)>> {
        let mut out: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (r, m) in &self.scores {
            for (v, s) in m {
                out.entry(v.clone()).or_default().push((r.clone(), *s));
            }
        }
        out
    }
}

/// Mean within-group population std of a rater over the duplicate groups
/// they rated at least twice; `None` when they saw no duplicates.
pub fn repeat_spread(table: &RaterTable, rater: &str) -> Option<f64> {
    let scores = table.scores.get(rater)?;
    let spreads: Vec<f64> = table
        .duplicate_groups
        .values()
        .filter_map(|group| {
            let s: Vec<f64> = group.iter().filter_map(|v| scores.get(v).copied()).collect();
            (s.len() >= 2).then(|| mean_std(&s).1)
        })
        .collect();
    (!spreads.is_empty()).then(|| spreads.iter().sum::<f64>() / spreads.len() as f64)
}

/// Keeps raters whose repeat spread is at most the given percentile of all
/// raters' spreads. Raters without duplicates pass.
pub fn repeat_consistency_filter(table: &RaterTable, q: f64) -> BTreeSet<String> {
    let spreads: BTreeMap<&String, Option<f64>> = table
        .scores
        .keys()
        .map(|r| (r, repeat_spread(table, r)))
        .collect();
    let values: Vec<f64> = spreads.values().flatten().copied().collect();
    if values.is_empty() {
        return table.raters();
    }
    let cutoff = percentile(&values, q);
    spreads
        .into_iter()
        .filter(|(_, s)| s.is_none_or(|s| s <= cutoff))
        .map(|(r, _)| r.clone())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bt500Stats {
    pub rater: String,
    pub above: usize,
    pub below: usize,
    pub rated: usize,
    pub r1: f64,
    pub r2: f64,
    pub rejected: bool,
}

/// Outlier threshold of one video: `2S` for near-normal kurtosis, else `√20·S`.
pub fn bt500_threshold(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let (mean, std) = mean_std(scores);
    let m2 = std * std;
    let m4 = scores.iter().map(|s| (s - mean).powi(4)).sum::<f64>() / n;
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
    let k = if (2.0..=4.0).contains(&kurtosis) { 2.0 } else { 20f64.sqrt() };
    (mean, k * std)
}

pub fn bt500_stats(table: &RaterTable) -> Vec<Bt500Stats> {
    let by_video = table.by_video();
    let thresholds: BTreeMap<&String, (f64, f64)> = by_video
        .iter()
        .map(|(v, rs)| {
            let s: Vec<f64> = rs.iter().map(|(_, s)| *s).collect();
            (v, bt500_threshold(&s))
        })
        .collect();
    table
        .scores
        .iter()
        .map(|(rater, m)| {
            let (mut p, mut q) = (0, 0);
            for (v, s) in m {
                let (mean, th) = thresholds[v];
                if *s > mean + th {
                    p += 1;
                } else if *s < mean - th {
                    q += 1;
                }
            }
            let n = m.len();
            let r1 = (p + q) as f64 / n as f64;
            let r2 = if p + q == 0 {
                0.0
            } else {
                (p as f64 - q as f64).abs() / (p + q) as f64
            };
            Bt500Stats {
                rater: rater.clone(),
                above: p,
                below: q,
                rated: n,
                r1,
                r2,
                rejected: (r1 > 0.05 && r2 < 0.3) || n < BT500_MIN_VIDEOS,
            }
        })
        .collect()
}

pub fn bt500_reject(table: &RaterTable) -> BTreeSet<String> {
    bt500_stats(table)
        .into_iter()
        .filter(|s| !s.rejected)
        .map(|s| s.rater)
        .collect()
}

/// Single pass in rater-id order: each rater is compared with the mean of
/// the other raters still retained at that point.
pub fn interrater_filter(table: &RaterTable, threshold: f64) -> BTreeSet<String> {
    let mut retained = table.raters();
    for rater in table.raters() {
        let own = &table.scores[&rater];
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (v, s) in own {
            let others: Vec<f64> = retained
                .iter()
                .filter(|r| **r != rater)
                .filter_map(|r| table.scores[r].get(v).copied())
                .collect();
            if !others.is_empty() {
                x.push(*s);
                y.push(others.iter().sum::<f64>() / others.len() as f64);
            }
        }
        let rho = if x.len() >= 2 { spearman(&x, &y).unwrap_or(f64::NAN) } else { f64::NAN };
        if !(rho >= threshold) {
            retained.remove(&rater);
        }
    }
    retained
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MosTable {
    pub mos: BTreeMap<String, f64>,
    pub z: BTreeMap<String, f64>,
    pub excluded: Vec<String>,
}

/// MOS over retained raters and its z-score across videos (population σ).
pub fn mos_zscore(table: &RaterTable, retained: &BTreeSet<String>) -> MosTable {
    let mut out = MosTable::default();
    for (video, ratings) in table.by_video() {
        let s: Vec<f64> = ratings
            .iter()
            .filter(|(r, _)| retained.contains(r))
            .map(|(_, s)| *s)
            .collect();
        if s.is_empty() {
            warn!("video `{video}` has no ratings from retained raters; excluded from MOS");
            out.excluded.push(video);
        } else {
            out.mos.insert(video, s.iter().sum::<f64>() / s.len() as f64);
        }
    }
    if out.mos.is_empty() {
        return out;
    }
    let values: Vec<f64> = out.mos.values().copied().collect();
    let (mu, sigma) = mean_std(&values);
    out.z = out
        .mos
        .iter()
        .map(|(v, m)| (v.clone(), if sigma > 0.0 { (m - mu) / sigma } else { 0.0 }))
        .collect();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub repeat_percentile: f64,
    pub interrater_threshold: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            repeat_percentile: DEFAULT_REPEAT_PERCENTILE,
            interrater_threshold: DEFAULT_INTERRATER_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub raters: BTreeSet<String>,
    pub after_repeat: BTreeSet<String>,
    pub after_bt500: BTreeSet<String>,
    pub after_interrater: BTreeSet<String>,
    pub bt500: Vec<Bt500Stats>,
    pub mos: MosTable,
}

impl StudyResult {
    pub fn rejected_per_stage(&self) -> [usize; 3] {
        [
            self.raters.len() - self.after_repeat.len(),
            self.after_repeat.len() - self.after_bt500.len(),
            self.after_bt500.len() - self.after_interrater.len(),
        ]
    }
}

/// Repeat consistency, then BT.500, then inter-rater agreement; every stage
/// sees only the raters the previous one kept.
pub fn run_study(table: &RaterTable, config: &StudyConfig) -> StudyResult {
    let after_repeat = repeat_consistency_filter(table, config.repeat_percentile);
    let t1 = table.restrict(&after_repeat);
    let bt500 = bt500_stats(&t1);
    let after_bt500: BTreeSet<String> =
        bt500.iter().filter(|s| !s.rejected).map(|s| s.rater.clone()).collect();
    let t2 = table.restrict(&after_bt500);
    let after_interrater = if after_bt500.len() >= 3 {
        interrater_filter(&t2, config.interrater_threshold)
    } else {
        warn!("fewer than three raters left; skipping the inter-rater filter");
        after_bt500.clone()
    };
    let mos = mos_zscore(table, &after_interrater);
    StudyResult {
        raters: table.raters(),
        after_repeat,
        after_bt500,
        after_interrater,
        bt500,
        mos,
    }
}

/// Pairwise win ratio per model: on every prompt both models scored, the
/// higher score wins and ties split the point. `None` for a model that
/// entered no comparison.
pub fn win_ratio(scores: &BTreeMap<String, BTreeMap<String, f64>>) -> BTreeMap<String, Option<f64>> {
    let models: Vec<&String> = scores.keys().collect();
    let mut wins = vec![0.0; models.len()];
    let mut games = vec![0usize; models.len()];
    for a in 0..models.len() {
        for b in a + 1..models.len() {
            for (prompt, sa) in &scores[models[a]] {
                let Some(sb) = scores[models[b]].get(prompt) else { continue };
                games[a] += 1;
                games[b] += 1;
                if sa > sb {
                    wins[a] += 1.0;
                } else if sb > sa {
                    wins[b] += 1.0;
                } else {
                    wins[a] += 0.5;
                    wins[b] += 0.5;
                }
            }
        }
    }
    models
        .iter()
        .enumerate()
        .map(|(i, m)| ((*m).clone(), (games[i] > 0).then(|| wins[i] / games[i] as f64)))
        .collect()
}

/// Model × prompt score matrix from per-video values and video metadata.
pub fn model_prompt_matrix(
    values: &BTreeMap<String, f64>,
    metadata: &BTreeMap<String, VideoMeta>,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (video, v) in values {
        if let Some(VideoMeta {
            model: Some(m),
            prompt: Some(p),
        }) = metadata.get(video)
        {
            out.entry(m.clone()).or_default().insert(p.clone(), *v);
        }
    }
    out
}

/// Population std of the first `n` ratings (rater-id order) for n = 2..N.
pub fn convergence_curve(table: &RaterTable, video_ids: &[String]) -> Result<BTreeMap<String, Vec<f64>>> {
    let by_video = table.by_video();
    video_ids
        .iter()
        .map(|v| {
            let ratings = by_video.get(v).map(Vec::as_slice).unwrap_or(&[]);
            if ratings.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "video `{v}` has {} rating(s); a convergence curve needs at least 2",
                    ratings.len()
                )));
            }
            let s: Vec<f64> = ratings.iter().map(|(_, s)| *s).collect();
            Ok((v.clone(), (2..=s.len()).map(|n| mean_std(&s[..n]).1).collect()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: DistortionKind,
    pub severity: f64,
    pub mean_s_cons: f64,
    pub mean_s_temp: f64,
    pub windows: usize,
}

/// Distorts every window at each (kind, severity), re-encodes it and
/// averages window-level S_cons (against the window's class centroid) and
/// S_temp. Window `i` uses distortion seed `seed + i`.
pub fn sensitivity_sweep(
    windows: &[TemporalWindow],
    params: &EncoderParams,
    config: &EncoderConfig,
    centroids: &ClassCentroids,
    kinds: &[DistortionKind],
    severities: &[f64],
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if windows.is_empty() {
        return Err(Error::InvalidInput("sensitivity sweep needs at least one window".into()));
    }
    let mut rows = Vec::new();
    for &kind in kinds {
        for &severity in severities {
            let (mut sc, mut st) = (0.0, 0.0);
            for (i, w) in windows.iter().enumerate() {
                let label = w.label.as_deref().ok_or_else(|| {
                    Error::InvalidInput(format!("window {}@{} has no label", w.video_id, w.start_frame))
                })?;
                let centroid = centroids.get(label)?;
                let spec = DistortionSpec::new(kind, severity, seed.wrapping_add(i as u64));
                let e = encode_window(&distort(w, &spec), params, config)?;
                sc += s_cons(e.z_cls.view(), centroid.view())?;
                st += s_temp_window(e.z_frames.view())?;
            }
            let n = windows.len() as f64;
            rows.push(SweepRow {
                kind,
                severity,
                mean_s_cons: sc / n,
                mean_s_temp: st / n,
                windows: windows.len(),
            });
        }
    }
    Ok(rows)
}

//! Fixed-length temporal windows and the temporal distortions applied to them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{s, Array2};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{rederive_motion, NormStats, PreparedSequence};

pub const DEFAULT_WINDOW_LEN: usize = 32;
pub const DEFAULT_OVERLAP: usize = 8;

#[derive(Clone, Debug)]
pub struct TemporalWindow {
    /// `T × D` normalized static rows.
    pub static_feats: Array2<f64>,
    /// `T × D` normalized motion rows, derived from `static_feats`.
    pub motion: Array2<f64>,
    pub video_id: String,
    pub start_frame: usize,
    /// Trailing rows that repeat the last real frame.
    pub pad_count: usize,
    pub label: Option<String>,
    pub norm: Arc<NormStats>,
}

impl TemporalWindow {
    pub fn len(&self) -> usize {
        self.static_feats.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.static_feats.nrows() == 0
    }

    /// Builds a window from normalized static rows, deriving motion.
    pub fn from_static(
        static_feats: Array2<f64>,
        norm: Arc<NormStats>,
        video_id: impl Into<String>,
        start_frame: usize,
        pad_count: usize,
        label: Option<String>,
    ) -> Self {
        let motion = rederive_motion(static_feats.view(), &norm);
        Self {
            static_feats,
            motion,
            video_id: video_id.into(),
            start_frame,
            pad_count,
            label,
            norm,
        }
    }
}

/// Window start frames: `0, s, 2s, …` with `s = T − overlap`, stopping once a
/// window reaches the last frame.
pub fn window_starts(len: usize, window_len: usize, overlap: usize) -> Result<Vec<usize>> {
    if window_len == 0 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    if overlap >= window_len {
        return Err(Error::Config(format!(
            "overlap {overlap} must be smaller than the window length {window_len}"
        )));
    }
    if len == 0 {
        return Err(Error::InvalidInput("cannot window an empty sequence".into()));
    }
    let stride = window_len - overlap;
    let mut starts = vec![0];
    while starts.last().unwrap() + window_len < len {
        let next = starts.last().unwrap() + stride;
        starts.push(next);
    }
    Ok(starts)
}

pub fn make_windows(
    seq: &PreparedSequence,
    window_len: usize,
    overlap: usize,
) -> Result<Vec<TemporalWindow>> {
    let len = seq.len();
    let starts = window_starts(len, window_len, overlap)?;
    let dim = seq.static_rows.ncols();
    Ok(starts
        .into_iter()
        .map(|start| {
            let end = (start + window_len).min(len);
            let real = end - start;
            let mut rows = Array2::zeros((window_len, dim));
            rows.slice_mut(s![..real, ..])
                .assign(&seq.static_rows.slice(s![start..end, ..]));
            let last = seq.static_rows.row(end - 1);
            for t in real..window_len {
                rows.row_mut(t).assign(&last);
            }
            TemporalWindow::from_static(
                rows,
                Arc::clone(&seq.norm),
                seq.video_id.clone(),
                start,
                window_len - real,
                seq.label.clone(),
            )
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionKind {
    Shuffle,
    Reverse,
    Copy,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 3] = [
        DistortionKind::Shuffle,
        DistortionKind::Reverse,
        DistortionKind::Copy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistortionKind::Shuffle => "shuffle",
            DistortionKind::Reverse => "reverse",
            DistortionKind::Copy => "copy",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shuffle" => Ok(DistortionKind::Shuffle),
            "reverse" => Ok(DistortionKind::Reverse),
            "copy" => Ok(DistortionKind::Copy),
            other => Err(Error::Config(format!("unknown distortion kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub severity: f64,
    pub rng_seed: u64,
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, severity: f64, rng_seed: u64) -> Self {
        let severity = if severity.is_nan() {
            0.0
        } else {
            severity.clamp(0.0, 1.0)
        };
        Self {
            kind,
            severity,
            rng_seed,
        }
    }

    /// Number of frames touched in a window of `len` frames: `⌈severity · len⌉`.
    pub fn affected_frames(&self, len: usize) -> usize {
        let raw = self.severity.clamp(0.0, 1.0) * len as f64;
        // absorb representation error such as 0.7 * 10 = 7.000000000000001
        let n = (raw - 1e-9).ceil().max(0.0) as usize;
        n.min(len)
    }
}

/// Row order produced by a distortion; `order[t]` is the source row of row `t`.
pub fn distortion_order(len: usize, spec: &DistortionSpec) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let n = spec.affected_frames(len);
    if n == 0 {
        return order;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    match spec.kind {
        DistortionKind::Shuffle => {
            let mut picked = index::sample(&mut rng, len, n).into_vec();
            picked.sort_unstable();
            let mut sources = picked.clone();
            sources.shuffle(&mut rng);
            for (dst, src) in picked.into_iter().zip(sources) {
                order[dst] = src;
            }
        }
        DistortionKind::Reverse => {
            let start = rng.random_range(0..=len - n);
            order[start..start + n].reverse();
        }
        DistortionKind::Copy => {
            for o in order.iter_mut().take(n) {
                *o = 0;
            }
        }
    }
    order
}

/// Applies a distortion to the static rows and re-derives motion.
pub fn distort(window: &TemporalWindow, spec: &DistortionSpec) -> TemporalWindow {
    let len = window.len();
    if spec.affected_frames(len) == 0 {
        return window.clone();
    }
    let order = distortion_order(len, spec);
    let mut rows = Array2::zeros(window.static_feats.raw_dim());
    for (dst, &src) in order.iter().enumerate() {
        rows.row_mut(dst).assign(&window.static_feats.row(src));
    }
    TemporalWindow::from_static(
        rows,
        Arc::clone(&window.norm),
        window.video_id.clone(),
        window.start_frame,
        window.pad_count,
        window.label.clone(),
    )
}

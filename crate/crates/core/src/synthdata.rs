//! Deterministic synthetic skeletal motion and the on-disk feature container.
//!
//! Each class drives every joint with its own sinusoid about a fixed axis and
//! spins the body at a class rate. Keypoints come from forward kinematics of
//! a 24-joint tree and an orthographic camera; the appearance vector mixes a
//! class direction with a pose-dependent term.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    FeatureSequence, FrameFeatures, Mat3, NUM_JOINTS, NUM_KEYPOINTS, SHAPE_DIM, VISUAL_DIM,
};

/// Parent of every body joint; joint 0 is the root driven by global orientation.
pub const PARENTS: [usize; NUM_JOINTS + 1] = [
    0, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

/// Rest-pose offset of each joint from its parent, in metres.
const OFFSETS: [[f64; 3]; NUM_JOINTS + 1] = [
    [0.0, 0.0, 0.0],
    [0.06, -0.09, 0.0],
    [-0.06, -0.09, 0.0],
    [0.0, 0.11, 0.0],
    [0.04, -0.38, 0.0],
    [-0.04, -0.38, 0.0],
    [0.0, 0.13, 0.0],
    [0.0, -0.40, -0.04],
    [0.0, -0.40, -0.04],
    [0.0, 0.05, 0.0],
    [0.02, -0.06, 0.12],
    [-0.02, -0.06, 0.12],
    [0.0, 0.21, 0.0],
    [0.08, 0.12, 0.0],
    [-0.08, 0.12, 0.0],
    [0.0, 0.09, 0.03],
    [0.11, 0.03, 0.0],
    [-0.11, 0.03, 0.0],
    [0.26, 0.0, 0.0],
    [-0.26, 0.0, 0.0],
    [0.25, 0.0, 0.0],
    [-0.25, 0.0, 0.0],
    [0.08, 0.0, 0.0],
    [-0.08, 0.0, 0.0],
];

/// Landmarks beyond the 24 joints: a point at `frac` along the bone ending at `joint`.
fn extra_landmarks() -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = (1..=NUM_JOINTS).map(|j| (j, 0.5)).collect();
    out.extend((1..=NUM_KEYPOINTS - 2 * NUM_JOINTS - 1).map(|j| (j, 0.25)));
    out
}

/// Orthographic camera: `u = 0.5 + s·x`, `v = 0.5 − s·y`.
const CAMERA_SCALE: f64 = 0.3;
const VISUAL_POSE_WEIGHT: f64 = 0.1;
const VISUAL_NOISE_STD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthClassSpec {
    pub label: String,
    pub axes: Vec<[f64; 3]>,
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    /// Yaw rate of the global orientation, rad/s.
    pub spin_rate: f64,
    pub appearance: Vec<f64>,
    pub shape_mean: [f64; SHAPE_DIM],
    pub shape_std: f64,
}

impl SynthClassSpec {
    pub fn validate(&self) -> Result<()> {
        let n = NUM_JOINTS;
        if self.axes.len() != n
            || self.amplitudes.len() != n
            || self.frequencies.len() != n
            || self.phases.len() != n
        {
            return Err(Error::Config(format!("class `{}` needs {n} joint drivers", self.label)));
        }
        if self.amplitudes.iter().any(|a| !(0.0..=PI).contains(a)) {
            return Err(Error::Config(format!("class `{}` has an amplitude outside [0, π]", self.label)));
        }
        if self.frequencies.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config(format!("class `{}` has a non-positive frequency", self.label)));
        }
        if self.appearance.len() != VISUAL_DIM {
            return Err(Error::Config(format!(
                "class `{}` appearance must have {VISUAL_DIM} dims",
                self.label
            )));
        }
        Ok(())
    }
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn class_label(k: usize) -> String {
    format!("action{k:02}")
}

/// Draws `k` class specifications from `seed`.
pub fn generate_class_specs(k: usize, seed: u64) -> Vec<SynthClassSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|c| {
            let axes = (0..NUM_JOINTS)
                .map(|_| {
                    let v = unit_vector(&mut rng, 3);
                    [v[0], v[1], v[2]]
                })
                .collect();
            SynthClassSpec {
                label: class_label(c),
                axes,
                amplitudes: (0..NUM_JOINTS).map(|_| rng.random_range(0.2..0.9)).collect(),
                frequencies: (0..NUM_JOINTS).map(|_| rng.random_range(0.5..2.0)).collect(),
                phases: (0..NUM_JOINTS).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
                spin_rate: rng.random_range(-1.0..1.0),
                appearance: unit_vector(&mut rng, VISUAL_DIM),
                shape_mean: [0.0; SHAPE_DIM],
                shape_std: 1.0,
            }
        })
        .collect()
}

/// Fixed linear map from the pose rotations (minus identity) into the
/// appearance space, shared by every class.
fn pose_projection(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let cols = NUM_JOINTS * 9;
    let scale = 1.0 / (cols as f64).sqrt();
    (0..VISUAL_DIM * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect()
}

fn axis_angle(axis: &[f64; 3], angle: f64) -> Mat3 {
    let axis = Unit::new_normalize(Vector3::new(axis[0], axis[1], axis[2]));
    Rotation3::from_axis_angle(&axis, angle).into_inner()
}

/// World positions of the 24 joints for a posed skeleton.
pub fn forward_kinematics(global_orient: &Mat3, pose: &[Mat3; NUM_JOINTS], bone_scale: f64) -> Vec<Vector3<f64>> {
    let mut rot = vec![Mat3::identity(); NUM_JOINTS + 1];
    let mut pos = vec![Vector3::zeros(); NUM_JOINTS + 1];
    rot[0] = *global_orient;
    for j in 1..=NUM_JOINTS {
        let p = PARENTS[j];
        let o = OFFSETS[j];
        pos[j] = pos[p] + rot[p] * Vector3::new(o[0], o[1], o[2]) * bone_scale;
        rot[j] = rot[p] * pose[j - 1];
    }
    pos
}

/// The 60 stick-figure landmarks projected into normalized image coordinates.
pub fn project_landmarks(joints: &[Vector3<f64>]) -> [[f64; 2]; NUM_KEYPOINTS] {
    let mut out = [[0.0; 2]; NUM_KEYPOINTS];
    let project = |p: &Vector3<f64>| [0.5 + CAMERA_SCALE * p.x, 0.5 - CAMERA_SCALE * p.y];
    for (i, p) in joints.iter().enumerate() {
        out[i] = project(p);
    }
    for (i, (j, frac)) in extra_landmarks().into_iter().enumerate() {
        let a = joints[PARENTS[j]];
        let b = joints[j];
        out[joints.len() + i] = project(&(a + (b - a) * frac));
    }
    out
}

fn generate_video(
    spec: &SynthClassSpec,
    projection: &[f64],
    video_id: String,
    frames: usize,
    fps: f64,
    rng: &mut ChaCha8Rng,
) -> FeatureSequence {
    let shape_noise = Normal::new(0.0, spec.shape_std).expect("finite std");
    let mut shape = [0.0; SHAPE_DIM];
    for (s, m) in shape.iter_mut().zip(&spec.shape_mean) {
        *s = m + shape_noise.sample(rng);
    }
    let bone_scale = 1.0 + 0.03 * shape[0].clamp(-3.0, 3.0);
    let t0 = rng.random_range(0.0..2.0);
    let phase_jitter: Vec<f64> = (0..NUM_JOINTS).map(|_| rng.random_range(-0.3..0.3)).collect();
    let yaw0 = rng.random_range(-0.5..0.5);
    let noise = Normal::new(0.0, VISUAL_NOISE_STD).expect("finite std");
    let up = [0.0, 1.0, 0.0];
    let cols = NUM_JOINTS * 9;

    let frames = (0..frames)
        .map(|t| {
            let time = t as f64 / fps + t0;
            let mut pose = [Mat3::identity(); NUM_JOINTS];
            for (j, r) in pose.iter_mut().enumerate() {
                let angle = spec.amplitudes[j]
                    * (2.0 * PI * spec.frequencies[j] * time + spec.phases[j] + phase_jitter[j]).sin();
                *r = axis_angle(&spec.axes[j], angle);
            }
            let global_orient = axis_angle(&up, yaw0 + spec.spin_rate * (t as f64 / fps));
            let joints = forward_kinematics(&global_orient, &pose, bone_scale);
            let keypoints = project_landmarks(&joints);

            let mut centred = Vec::with_capacity(cols);
            for r in &pose {
                let d = r - Mat3::identity();
                for i in 0..3 {
                    for k in 0..3 {
                        centred.push(d[(i, k)]);
                    }
                }
            }
            let visual = (0..VISUAL_DIM)
                .map(|i| {
                    let row = &projection[i * cols..(i + 1) * cols];
                    let lin: f64 = row.iter().zip(&centred).map(|(a, b)| a * b).sum();
                    spec.appearance[i] + VISUAL_POSE_WEIGHT * lin + noise.sample(rng)
                })
                .collect();
            FrameFeatures {
                pose,
                global_orient,
                shape,
                keypoints,
                visual,
            }
        })
        .collect();
    FeatureSequence {
        frames,
        fps,
        video_id,
        label: Some(spec.label.clone()),
        subject_id: None,
    }
}

/// Generates `k · videos_per_class` labeled sequences of `frames` frames,
/// class-major. Every video draws from its own RNG stream so the output is
/// independent of generation order.
pub fn generate_dataset(
    k: usize,
    videos_per_class: usize,
    frames: usize,
    fps: f64,
    seed: u64,
) -> Result<Vec<FeatureSequence>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {k}")));
    }
    if frames < 2 {
        return Err(Error::Config(format!("need at least 2 frames per video, got {frames}")));
    }
    if videos_per_class == 0 {
        return Err(Error::Config("videos_per_class must be positive".into()));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::Config(format!("fps must be positive, got {fps}")));
    }
    let specs = generate_class_specs(k, seed);
    generate_from_specs(&specs, videos_per_class, frames, fps, seed)
}

pub fn generate_from_specs(
    specs: &[SynthClassSpec],
    videos_per_class: usize,
    frames: usize,
    fps: f64,
    seed: u64,
) -> Result<Vec<FeatureSequence>> {
    for s in specs {
        s.validate()?;
    }
    let projection = pose_projection(seed);
    let mut out = Vec::with_capacity(specs.len() * videos_per_class);
    for (c, spec) in specs.iter().enumerate() {
        for v in 0..videos_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + (c * videos_per_class + v) as u64);
            let id = format!("{}_v{v:03}", spec.label);
            let mut seq = generate_video(spec, &projection, id, frames, fps, &mut rng);
            seq.subject_id = Some(format!("subject{:03}", v));
            out.push(seq);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Per class, the last `⌈test_fraction · n⌉` videos (in order) go to test and
/// the `⌈val_fraction · n⌉` before them to validation.
pub fn assign_splits(seqs: &[FeatureSequence], val_fraction: f64, test_fraction: f64) -> Result<Vec<Split>> {
    if !(0.0..1.0).contains(&val_fraction) || !(0.0..1.0).contains(&test_fraction) || val_fraction + test_fraction >= 1.0 {
        return Err(Error::Config("split fractions must be in [0, 1) and sum below 1".into()));
    }
    let mut by_class: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
    for (i, s) in seqs.iter().enumerate() {
        by_class.entry(s.label.as_deref()).or_default().push(i);
    }
    let mut out = vec![Split::Train; seqs.len()];
    for members in by_class.values() {
        let n = members.len();
        let n_test = (test_fraction * n as f64).ceil() as usize;
        let n_val = (val_fraction * n as f64).ceil() as usize;
        for (pos, &i) in members.iter().enumerate() {
            if pos + n_test >= n {
                out[i] = Split::Test;
            } else if pos + n_test + n_val >= n {
                out[i] = Split::Val;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Feature container

pub const FEATURE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureArray {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub format_version: u32,
    pub video_id: String,
    pub label: Option<String>,
    #[serde(default)]
    pub subject_id: Option<String>,
    pub fps: f64,
    pub data: String,
    pub arrays: Vec<FeatureArray>,
}

fn expected_shapes(frames: usize) -> [(&'static str, Vec<usize>); 5] {
    [
        ("pose", vec![frames, NUM_JOINTS, 3, 3]),
        ("global_orient", vec![frames, 3, 3]),
        ("shape", vec![frames, SHAPE_DIM]),
        ("keypoints", vec![frames, NUM_KEYPOINTS, 2]),
        ("visual", vec![frames, VISUAL_DIM]),
    ]
}

fn row_major(m: Mat3) -> impl Iterator<Item = f64> {
    (0..3).flat_map(move |i| (0..3).map(move |k| m[(i, k)]))
}

pub fn manifest_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.manifest.json"))
}

/// Writes `<video_id>.manifest.json` and `<video_id>.f32` into `dir` and
/// returns the manifest path.
pub fn write_features(seq: &FeatureSequence, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let l = seq.len();
    let mut data: Vec<f32> = Vec::with_capacity(l * crate::features::FRAME_DIM);
    let mut arrays = Vec::new();
    let mut push = |name: &str, shape: Vec<usize>, values: &mut dyn Iterator<Item = f64>, data: &mut Vec<f32>| {
        let offset = data.len() * 4;
        data.extend(values.map(|v| v as f32));
        arrays.push(FeatureArray {
            name: name.into(),
            dtype: "f32le".into(),
            shape,
            offset,
            length: data.len() * 4 - offset,
        });
    };
    let [pose, go, shape, kp, vis] = expected_shapes(l);
    push(pose.0, pose.1, &mut seq.frames.iter().flat_map(|f| f.pose.iter().flat_map(|m| row_major(*m))), &mut data);
    push(go.0, go.1, &mut seq.frames.iter().flat_map(|f| row_major(f.global_orient)), &mut data);
    push(shape.0, shape.1, &mut seq.frames.iter().flat_map(|f| f.shape), &mut data);
    push(kp.0, kp.1, &mut seq.frames.iter().flat_map(|f| f.keypoints.iter().flatten().copied()), &mut data);
    push(vis.0, vis.1, &mut seq.frames.iter().flat_map(|f| f.visual.iter().copied()), &mut data);

    let data_name = format!("{}.f32", seq.video_id);
    let manifest = FeatureManifest {
        format_version: FEATURE_FORMAT_VERSION,
        video_id: seq.video_id.clone(),
        label: seq.label.clone(),
        subject_id: seq.subject_id.clone(),
        fps: seq.fps,
        data: data_name.clone(),
        arrays,
    };
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    let data_path = dir.join(&data_name);
    fs::write(&data_path, bytes).map_err(|e| Error::io(&data_path, e))?;
    let path = manifest_path(dir, &seq.video_id);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn check_manifest(m: &FeatureManifest, path: &Path) -> Result<usize> {
    if m.format_version != FEATURE_FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported feature format version {}", m.format_version)));
    }
    let frames = m
        .arrays
        .iter()
        .find(|a| a.name == "pose")
        .and_then(|a| a.shape.first().copied())
        .ok_or_else(|| Error::format(path, "missing array `pose`"))?;
    for (name, shape) in expected_shapes(frames) {
        let a = m
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::format(path, format!("missing array `{name}`")))?;
        if a.shape != shape {
            return Err(Error::format(
                path,
                format!("array `{name}` has shape {:?}, expected {:?}", a.shape, shape),
            ));
        }
        if a.dtype != "f32le" {
            return Err(Error::format(path, format!("array `{name}` has unsupported dtype `{}`", a.dtype)));
        }
        if a.length != shape.iter().product::<usize>() * 4 {
            return Err(Error::format(path, format!("array `{name}` byte length does not match its shape")));
        }
    }
    let mut spans: Vec<(usize, usize, &str)> = m
        .arrays
        .iter()
        .map(|a| (a.offset, a.offset + a.length, a.name.as_str()))
        .collect();
    spans.sort();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::format(path, format!("arrays `{}` and `{}` overlap", w[0].2, w[1].2)));
        }
    }
    Ok(frames)
}

/// Reads a sequence from its manifest, validating shapes against the fixed
/// per-frame feature dimensions.
pub fn read_features(manifest: &Path) -> Result<FeatureSequence> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let m: FeatureManifest =
        serde_json::from_str(&text).map_err(|e| Error::format(manifest, e.to_string()))?;
    let frames = check_manifest(&m, manifest)?;
    let data_path = manifest.parent().unwrap_or(Path::new(".")).join(&m.data);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let needed = m.arrays.iter().map(|a| a.offset + a.length).max().unwrap_or(0);
    if bytes.len() < needed {
        let e = io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("data file has {} bytes, manifest needs {needed}", bytes.len()),
        );
        return Err(Error::io(&data_path, e));
    }
    if bytes.len() > needed {
        return Err(Error::format(&data_path, format!("data file has {} trailing bytes", bytes.len() - needed)));
    }
    let values = |name: &str| -> Vec<f64> {
        let a = m.arrays.iter().find(|a| a.name == name).expect("checked above");
        bytes[a.offset..a.offset + a.length]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect()
    };
    let pose = values("pose");
    let go = values("global_orient");
    let shape = values("shape");
    let kp = values("keypoints");
    let vis = values("visual");
    let mat = |v: &[f64]| Mat3::from_row_slice(v);
    let frames = (0..frames)
        .map(|t| {
            let mut f = FrameFeatures::rest();
            for j in 0..NUM_JOINTS {
                let o = (t * NUM_JOINTS + j) * 9;
                f.pose[j] = mat(&pose[o..o + 9]);
            }
            f.global_orient = mat(&go[t * 9..t * 9 + 9]);
            f.shape.copy_from_slice(&shape[t * SHAPE_DIM..(t + 1) * SHAPE_DIM]);
            for i in 0..NUM_KEYPOINTS {
                let o = (t * NUM_KEYPOINTS + i) * 2;
                f.keypoints[i] = [kp[o], kp[o + 1]];
            }
            f.visual = vis[t * VISUAL_DIM..(t + 1) * VISUAL_DIM].to_vec();
            f
        })
        .collect();
    let seq = FeatureSequence {
        frames,
        fps: m.fps,
        video_id: m.video_id,
        label: m.label,
        subject_id: m.subject_id,
    };
    seq.validate()?;
    Ok(seq)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// Manifest path, relative to the index file's directory.
    pub path: String,
    pub label: String,
    pub split: Split,
}

pub const INDEX_FILE: &str = "index.csv";

pub fn write_index(path: &Path, entries: &[IndexEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for e in entries {
        w.serialize(e).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

/// Loads every sequence listed in an index, paired with its split.
pub fn load_indexed(index: &Path) -> Result<Vec<(FeatureSequence, Split)>> {
    let root = index.parent().unwrap_or(Path::new("."));
    read_index(index)?
        .into_iter()
        .map(|e| {
            let mut seq = read_features(&root.join(&e.path))?;
            if seq.label.is_none() && !e.label.is_empty() {
                seq.label = Some(e.label);
            }
            Ok((seq, e.split))
        })
        .collect()
}

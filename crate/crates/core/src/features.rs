//! Per-frame human-centric features and their first-order temporal derivatives.
//!
//! A frame carries 23 joint rotations, the pelvis (global) orientation, 10 body
//! shape coefficients, 60 normalized 2D keypoints (18 body + 42 hand) and a
//! 1024-d appearance embedding. Every frame flattens to [`FRAME_DIM`] values in
//! a fixed order:
//!
//! | block           | offset | len  | order                          |
//! |-----------------|--------|------|--------------------------------|
//! | pose            | 0      | 207  | joint-major, each 3x3 row-major |
//! | global_orient   | 207    | 9    | row-major                      |
//! | shape           | 216    | 10   |                                |
//! | keypoints       | 226    | 120  | point-major, (x, y)            |
//! | visual          | 346    | 1024 |                                |
//!
//! Motion features use exactly the same layout, and the normalization vector is
//! the static block followed by the motion block (`2 * FRAME_DIM` entries).

use std::sync::Arc;

use nalgebra::Matrix3;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;

pub const NUM_JOINTS: usize = 23;
pub const SHAPE_DIM: usize = 10;
pub const NUM_KEYPOINTS: usize = 60;
pub const VISUAL_DIM: usize = 1024;

pub const POSE_OFFSET: usize = 0;
pub const POSE_DIM: usize = NUM_JOINTS * 9;
pub const GLOBAL_ORIENT_OFFSET: usize = POSE_OFFSET + POSE_DIM;
pub const GLOBAL_ORIENT_DIM: usize = 9;
pub const SHAPE_OFFSET: usize = GLOBAL_ORIENT_OFFSET + GLOBAL_ORIENT_DIM;
pub const KEYPOINTS_OFFSET: usize = SHAPE_OFFSET + SHAPE_DIM;
pub const KEYPOINTS_DIM: usize = NUM_KEYPOINTS * 2;
pub const VISUAL_OFFSET: usize = KEYPOINTS_OFFSET + KEYPOINTS_DIM;
pub const FRAME_DIM: usize = VISUAL_OFFSET + VISUAL_DIM;

/// Joint index used in error messages for the global (pelvis) orientation.
pub const GLOBAL_ORIENT_JOINT: usize = NUM_JOINTS;

/// Orthonormality / determinant tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-5;

/// Keypoints may sit slightly outside the image.
pub const KEYPOINT_MIN: f64 = -0.5;
pub const KEYPOINT_MAX: f64 = 1.5;

pub const DEFAULT_STD_FLOOR: f64 = 1e-6;

/// Checks `‖RᵀR − I‖_F < tol` and `|det R − 1| ≤ tol`.
pub fn validate_rotation(joint: usize, r: &Mat3) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRotation {
            joint,
            reason: "non-finite entry".into(),
        });
    }
    let ortho = (r.transpose() * r - Mat3::identity()).norm();
    if ortho >= ROTATION_TOL {
        return Err(Error::InvalidRotation {
            joint,
            reason: format!("not orthonormal (‖RᵀR − I‖_F = {ortho:.3e})"),
        });
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(Error::InvalidRotation {
            joint,
            reason: format!("determinant {det:.6} is not 1"),
        });
    }
    Ok(())
}

/// Rotation taking the previous frame's orientation to the next: `R_next · R_prevᵀ`.
///
/// `joint` only labels the error when either input is not a rotation.
pub fn relative_rotation(joint: usize, r_prev: &Mat3, r_next: &Mat3) -> Result<Mat3> {
    validate_rotation(joint, r_prev)?;
    validate_rotation(joint, r_next)?;
    Ok(r_next * r_prev.transpose())
}

fn mat3_from_row_major(v: &[f64]) -> Mat3 {
    Mat3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
}

fn mat3_from_view(v: ArrayView1<f64>, offset: usize) -> Mat3 {
    Mat3::from_fn(|r, c| v[offset + 3 * r + c])
}

fn write_row_major(m: &Mat3, out: &mut [f64]) {
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
}

/// Converts pixel keypoints to normalized image coordinates.
pub fn normalize_keypoints_px(points_px: &[[f64; 2]], width: f64, height: f64) -> Vec<[f64; 2]> {
    points_px
        .iter()
        .map(|p| [p[0] / width, p[1] / height])
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub pose: [Mat3; NUM_JOINTS],
    pub global_orient: Mat3,
    pub shape: [f64; SHAPE_DIM],
    pub keypoints: [[f64; 2]; NUM_KEYPOINTS],
    pub visual: Vec<f64>,
}

impl FrameFeatures {
    /// Rest pose: identity rotations, zero shape, keypoints at the image centre.
    pub fn rest() -> Self {
        Self {
            pose: [Mat3::identity(); NUM_JOINTS],
            global_orient: Mat3::identity(),
            shape: [0.0; SHAPE_DIM],
            keypoints: [[0.5, 0.5]; NUM_KEYPOINTS],
            visual: vec![0.0; VISUAL_DIM],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (j, r) in self.pose.iter().enumerate() {
            validate_rotation(j, r)?;
        }
        validate_rotation(GLOBAL_ORIENT_JOINT, &self.global_orient)?;
        if self.shape.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures("shape has non-finite values".into()));
        }
        for (i, kp) in self.keypoints.iter().enumerate() {
            if kp
                .iter()
                .any(|v| !v.is_finite() || *v < KEYPOINT_MIN || *v > KEYPOINT_MAX)
            {
                return Err(Error::InvalidFeatures(format!(
                    "keypoint {i} = ({}, {}) outside [{KEYPOINT_MIN}, {KEYPOINT_MAX}]",
                    kp[0], kp[1]
                )));
            }
        }
        if self.visual.len() != VISUAL_DIM {
            return Err(Error::InvalidFeatures(format!(
                "visual has {} values, expected {VISUAL_DIM}",
                self.visual.len()
            )));
        }
        if self.visual.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures("visual has non-finite values".into()));
        }
        Ok(())
    }

    pub fn flatten_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), FRAME_DIM);
        for (j, r) in self.pose.iter().enumerate() {
            write_row_major(r, &mut out[POSE_OFFSET + 9 * j..POSE_OFFSET + 9 * (j + 1)]);
        }
        write_row_major(
            &self.global_orient,
            &mut out[GLOBAL_ORIENT_OFFSET..SHAPE_OFFSET],
        );
        out[SHAPE_OFFSET..KEYPOINTS_OFFSET].copy_from_slice(&self.shape);
        for (i, kp) in self.keypoints.iter().enumerate() {
            out[KEYPOINTS_OFFSET + 2 * i] = kp[0];
            out[KEYPOINTS_OFFSET + 2 * i + 1] = kp[1];
        }
        out[VISUAL_OFFSET..FRAME_DIM].copy_from_slice(&self.visual);
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![0.0; FRAME_DIM];
        self.flatten_into(&mut out);
        out
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() != FRAME_DIM {
            return Err(Error::Shape(format!(
                "flattened frame has {} values, expected {FRAME_DIM}",
                v.len()
            )));
        }
        let mut f = Self::rest();
        for j in 0..NUM_JOINTS {
            f.pose[j] = mat3_from_row_major(&v[POSE_OFFSET + 9 * j..]);
        }
        f.global_orient = mat3_from_row_major(&v[GLOBAL_ORIENT_OFFSET..]);
        f.shape.copy_from_slice(&v[SHAPE_OFFSET..KEYPOINTS_OFFSET]);
        for i in 0..NUM_KEYPOINTS {
            f.keypoints[i] = [v[KEYPOINTS_OFFSET + 2 * i], v[KEYPOINTS_OFFSET + 2 * i + 1]];
        }
        f.visual.copy_from_slice(&v[VISUAL_OFFSET..FRAME_DIM]);
        Ok(f)
    }
}

/// First-order temporal features of one frame relative to its predecessor.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionFeatures {
    pub pose_rel: [Mat3; NUM_JOINTS],
    pub go_rel: Mat3,
    pub shape_diff: [f64; SHAPE_DIM],
    pub kp_diff: [[f64; 2]; NUM_KEYPOINTS],
    pub vis_diff: Vec<f64>,
}

impl MotionFeatures {
    /// Boundary value: identity rotations and zero differences.
    pub fn zero() -> Self {
        Self {
            pose_rel: [Mat3::identity(); NUM_JOINTS],
            go_rel: Mat3::identity(),
            shape_diff: [0.0; SHAPE_DIM],
            kp_diff: [[0.0; 2]; NUM_KEYPOINTS],
            vis_diff: vec![0.0; VISUAL_DIM],
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let as_frame = FrameFeatures {
            pose: self.pose_rel,
            global_orient: self.go_rel,
            shape: self.shape_diff,
            keypoints: self.kp_diff,
            visual: self.vis_diff.clone(),
        };
        as_frame.flatten()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub frames: Vec<FrameFeatures>,
    pub fps: f64,
    pub video_id: String,
    pub label: Option<String>,
    pub subject_id: Option<String>,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidFeatures(format!(
                "video `{}` has no frames",
                self.video_id
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidFeatures(format!(
                "video `{}` has invalid fps {}",
                self.video_id, self.fps
            )));
        }
        for f in &self.frames {
            f.validate()?;
        }
        Ok(())
    }

    /// `L × FRAME_DIM` matrix of raw flattened frames.
    pub fn flat_rows(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.frames.len(), FRAME_DIM));
        for (t, f) in self.frames.iter().enumerate() {
            f.flatten_into(out.row_mut(t).as_slice_mut().unwrap());
        }
        out
    }
}

/// Motion features for every frame; frame 0 gets the identity/zero boundary value.
pub fn derive_motion(seq: &FeatureSequence) -> Result<Vec<MotionFeatures>> {
    if seq.frames.is_empty() {
        return Err(Error::InvalidFeatures("empty sequence".into()));
    }
    let mut out = Vec::with_capacity(seq.frames.len());
    out.push(MotionFeatures::zero());
    for pair in seq.frames.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let mut m = MotionFeatures::zero();
        for j in 0..NUM_JOINTS {
            m.pose_rel[j] = relative_rotation(j, &prev.pose[j], &next.pose[j])?;
        }
        m.go_rel = relative_rotation(
            GLOBAL_ORIENT_JOINT,
            &prev.global_orient,
            &next.global_orient,
        )?;
        for i in 0..SHAPE_DIM {
            m.shape_diff[i] = next.shape[i] - prev.shape[i];
        }
        for i in 0..NUM_KEYPOINTS {
            m.kp_diff[i] = [
                next.keypoints[i][0] - prev.keypoints[i][0],
                next.keypoints[i][1] - prev.keypoints[i][1],
            ];
        }
        for (d, (a, b)) in m
            .vis_diff
            .iter_mut()
            .zip(prev.visual.iter().zip(&next.visual))
        {
            *d = b - a;
        }
        out.push(m);
    }
    Ok(out)
}

/// Motion rows for already-validated flattened frames (same convention as
/// [`derive_motion`], no rotation checks).
pub fn motion_rows(raw: ArrayView2<f64>) -> Array2<f64> {
    let (len, dim) = raw.dim();
    assert_eq!(dim, FRAME_DIM, "motion_rows expects flattened frames");
    let mut out = Array2::zeros((len, FRAME_DIM));
    if len == 0 {
        return out;
    }
    identity_motion(out.row_mut(0));
    for t in 1..len {
        let prev = raw.row(t - 1);
        let next = raw.row(t);
        let mut row = out.row_mut(t);
        let row = row.as_slice_mut().unwrap();
        for j in 0..=NUM_JOINTS {
            let o = 9 * j;
            let rel = mat3_from_view(next, o) * mat3_from_view(prev, o).transpose();
            write_row_major(&rel, &mut row[o..o + 9]);
        }
        for i in SHAPE_OFFSET..FRAME_DIM {
            row[i] = next[i] - prev[i];
        }
    }
    out
}

fn identity_motion(mut row: ArrayViewMut1<f64>) {
    row.fill(0.0);
    for j in 0..=NUM_JOINTS {
        for d in 0..3 {
            row[9 * j + 4 * d] = 1.0;
        }
    }
}

/// Per-dimension z-scoring statistics over the static block then the motion block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Already floored: every entry is at least `std_floor`.
    pub std: Vec<f64>,
    pub std_floor: f64,
}

impl NormStats {
    /// Mean 0 and std 1 everywhere: normalization becomes a no-op.
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; 2 * FRAME_DIM],
            std: vec![1.0; 2 * FRAME_DIM],
            std_floor: DEFAULT_STD_FLOOR,
        }
    }

    pub fn fit(train: &[FeatureSequence], std_floor: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidInput(
                "normalization needs at least one training sequence".into(),
            ));
        }
        if !(std_floor > 0.0) {
            return Err(Error::Config(format!("std_floor must be positive, got {std_floor}")));
        }
        let mut sum = vec![0.0; 2 * FRAME_DIM];
        let mut count = 0usize;
        let mut blocks = Vec::with_capacity(train.len());
        for seq in train {
            seq.validate()?;
            let stat = seq.flat_rows();
            let motion = motion_rows(stat.view());
            for t in 0..stat.nrows() {
                for (acc, v) in sum[..FRAME_DIM].iter_mut().zip(stat.row(t)) {
                    *acc += v;
                }
                for (acc, v) in sum[FRAME_DIM..].iter_mut().zip(motion.row(t)) {
                    *acc += v;
                }
            }
            count += stat.nrows();
            blocks.push((stat, motion));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut sq = vec![0.0; 2 * FRAME_DIM];
        for (stat, motion) in &blocks {
            for t in 0..stat.nrows() {
                for (i, v) in stat.row(t).iter().enumerate() {
                    sq[i] += (v - mean[i]).powi(2);
                }
                for (i, v) in motion.row(t).iter().enumerate() {
                    sq[FRAME_DIM + i] += (v - mean[FRAME_DIM + i]).powi(2);
                }
            }
        }
        let std = sq.iter().map(|s| (s / n).sqrt().max(std_floor)).collect();
        Ok(Self {
            mean,
            std,
            std_floor,
        })
    }

    pub fn normalize_static(&self, row: ArrayViewMut1<f64>) {
        apply(row, &self.mean[..FRAME_DIM], &self.std[..FRAME_DIM], false);
    }

    pub fn normalize_motion(&self, row: ArrayViewMut1<f64>) {
        apply(row, &self.mean[FRAME_DIM..], &self.std[FRAME_DIM..], false);
    }

    pub fn denormalize_static(&self, row: ArrayViewMut1<f64>) {
        apply(row, &self.mean[..FRAME_DIM], &self.std[..FRAME_DIM], true);
    }

    pub fn denormalize_motion(&self, row: ArrayViewMut1<f64>) {
        apply(row, &self.mean[FRAME_DIM..], &self.std[FRAME_DIM..], true);
    }

    /// Whether dimension `i` (of the `2 * FRAME_DIM` vector) hit the floor.
    pub fn is_floored(&self, i: usize) -> bool {
        self.std[i] <= self.std_floor
    }
}

fn apply(mut row: ArrayViewMut1<f64>, mean: &[f64], std: &[f64], inverse: bool) {
    for ((v, m), s) in row.iter_mut().zip(mean).zip(std) {
        *v = if inverse { *v * s + m } else { (*v - m) / s };
    }
}

/// A sequence flattened and z-scored, ready for windowing.
#[derive(Clone, Debug)]
pub struct PreparedSequence {
    pub video_id: String,
    pub label: Option<String>,
    pub subject_id: Option<String>,
    pub fps: f64,
    /// `L × FRAME_DIM`, normalized.
    pub static_rows: Array2<f64>,
    /// `L × FRAME_DIM`, normalized.
    pub motion_rows: Array2<f64>,
    pub norm: Arc<NormStats>,
}

impl PreparedSequence {
    pub fn new(seq: &FeatureSequence, norm: Arc<NormStats>) -> Result<Self> {
        seq.validate()?;
        let mut stat = seq.flat_rows();
        let mut motion = motion_rows(stat.view());
        for t in 0..stat.nrows() {
            norm.normalize_static(stat.row_mut(t));
            norm.normalize_motion(motion.row_mut(t));
        }
        Ok(Self {
            video_id: seq.video_id.clone(),
            label: seq.label.clone(),
            subject_id: seq.subject_id.clone(),
            fps: seq.fps,
            static_rows: stat,
            motion_rows: motion,
            norm,
        })
    }

    pub fn len(&self) -> usize {
        self.static_rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.static_rows.nrows() == 0
    }

    /// Raw (denormalized) static row `t`.
    pub fn raw_static_row(&self, t: usize) -> Vec<f64> {
        let mut row = self.static_rows.row(t).to_owned();
        self.norm.denormalize_static(row.view_mut());
        row.to_vec()
    }
}

/// Fits statistics on `train` and prepares both sets with them.
pub fn fit_and_apply_normalization(
    train: &[FeatureSequence],
    other: &[FeatureSequence],
    std_floor: f64,
) -> Result<(Arc<NormStats>, Vec<PreparedSequence>, Vec<PreparedSequence>)> {
    let stats = Arc::new(NormStats::fit(train, std_floor)?);
    let prep = |set: &[FeatureSequence]| -> Result<Vec<PreparedSequence>> {
        set.iter()
            .map(|s| PreparedSequence::new(s, Arc::clone(&stats)))
            .collect()
    };
    let train_prepared = prep(train)?;
    let other_prepared = prep(other)?;
    Ok((stats, train_prepared, other_prepared))
}

/// Recomputes normalized motion rows from normalized static rows.
pub fn rederive_motion(static_rows: ArrayView2<f64>, norm: &NormStats) -> Array2<f64> {
    let mut raw = static_rows.to_owned();
    for t in 0..raw.nrows() {
        norm.denormalize_static(raw.row_mut(t));
    }
    let mut motion = motion_rows(raw.view());
    for t in 0..motion.nrows() {
        norm.normalize_motion(motion.row_mut(t));
    }
    motion
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};

    fn rz(deg: f64) -> Mat3 {
        Rotation3::from_axis_angle(&Vector3::z_axis(), deg.to_radians()).into_inner()
    }

    fn rx(deg: f64) -> Mat3 {
        Rotation3::from_axis_angle(&Vector3::x_axis(), deg.to_radians()).into_inner()
    }

    fn ry(deg: f64) -> Mat3 {
        Rotation3::from_axis_angle(&Vector3::y_axis(), deg.to_radians()).into_inner()
    }

    fn matmul_oracle(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    fn seq(frames: Vec<FrameFeatures>) -> FeatureSequence {
        FeatureSequence {
            frames,
            fps: 30.0,
            video_id: "v".into(),
            label: Some("a".into()),
            subject_id: None,
        }
    }

    #[test]
    fn relative_rotation_identical_frames_is_identity() {
        let r = relative_rotation(0, &rz(90.0), &rz(90.0)).unwrap();
        assert!((r - Mat3::identity()).norm() < 1e-12);
    }

    #[test]
    fn relative_rotation_from_identity() {
        let r = relative_rotation(0, &Mat3::identity(), &rz(30.0)).unwrap();
        assert!((r - rz(30.0)).norm() < 1e-12);
    }

    #[test]
    fn relative_rotation_matches_explicit_product() {
        let r = relative_rotation(0, &rx(90.0), &ry(90.0)).unwrap();
        let expected = matmul_oracle(&ry(90.0), &rx(-90.0));
        assert!((r - expected).norm() < 1e-12);
        validate_rotation(0, &r).unwrap();
    }

    #[test]
    fn relative_rotation_rejects_non_orthonormal() {
        let mut bad = rz(10.0);
        bad[(0, 0)] *= 1.1;
        match relative_rotation(7, &Mat3::identity(), &bad) {
            Err(Error::InvalidRotation { joint, .. }) => assert_eq!(joint, 7),
            other => panic!("expected rotation error, got {other:?}"),
        }
        let reflection = Mat3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(validate_rotation(3, &reflection).is_err());
    }

    #[test]
    fn constant_sequence_has_zero_motion() {
        let mut f = FrameFeatures::rest();
        f.pose[4] = rz(40.0);
        f.shape[2] = 0.7;
        f.visual[100] = -1.5;
        let m = derive_motion(&seq(vec![f.clone(), f.clone(), f])).unwrap();
        assert_eq!(m.len(), 3);
        for mf in &m {
            for j in 0..NUM_JOINTS {
                assert!((mf.pose_rel[j] - Mat3::identity()).norm() < 1e-12);
            }
            assert!(mf.shape_diff.iter().all(|v| *v == 0.0));
            assert!(mf.kp_diff.iter().flatten().all(|v| *v == 0.0));
            assert!(mf.vis_diff.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn single_frame_gets_boundary_motion() {
        let m = derive_motion(&seq(vec![FrameFeatures::rest()])).unwrap();
        assert_eq!(m, vec![MotionFeatures::zero()]);
    }

    #[test]
    fn shape_difference_vector() {
        let a = FrameFeatures::rest();
        let mut b = FrameFeatures::rest();
        b.shape[0] = 1.0;
        let m = derive_motion(&seq(vec![a, b])).unwrap();
        let mut expected = [0.0; SHAPE_DIM];
        expected[0] = 1.0;
        assert_eq!(m[1].shape_diff, expected);
        let norm: f64 = m[1].shape_diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_eq!(norm, 1.0);
    }

    #[test]
    fn flat_motion_matches_typed_motion() {
        let mut a = FrameFeatures::rest();
        let mut b = FrameFeatures::rest();
        a.pose[2] = rx(20.0);
        b.pose[2] = ry(35.0);
        b.global_orient = rz(5.0);
        b.keypoints[3] = [0.4, 0.6];
        b.visual[7] = 2.0;
        let s = seq(vec![a, b]);
        let typed: Vec<Vec<f64>> = derive_motion(&s).unwrap().iter().map(|m| m.flatten()).collect();
        let flat = motion_rows(s.flat_rows().view());
        for t in 0..2 {
            for i in 0..FRAME_DIM {
                assert!((typed[t][i] - flat[(t, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flatten_round_trip_is_exact() {
        let mut f = FrameFeatures::rest();
        f.pose[22] = rx(13.0);
        f.global_orient = ry(-71.0);
        f.shape = [0.1, -0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        f.keypoints[59] = [1.2, -0.3];
        f.visual[1023] = 3.25;
        let back = FrameFeatures::from_flat(&f.flatten()).unwrap();
        assert_eq!(back, f);
        assert!(FrameFeatures::from_flat(&[0.0; 10]).is_err());
    }

    #[test]
    fn keypoint_range_is_enforced() {
        let mut f = FrameFeatures::rest();
        f.keypoints[0] = [1.6, 0.5];
        assert!(f.validate().is_err());
        f.keypoints[0] = [1.5, -0.5];
        f.validate().unwrap();
    }

    #[test]
    fn pixel_keypoints_scale_to_unit_range() {
        let out = normalize_keypoints_px(&[[320.0, 120.0]], 640.0, 480.0);
        assert_eq!(out, vec![[0.5, 0.25]]);
    }

    fn with_visual0(values: &[f64]) -> FeatureSequence {
        let frames = values
            .iter()
            .map(|v| {
                let mut f = FrameFeatures::rest();
                f.visual[0] = *v;
                f
            })
            .collect();
        seq(frames)
    }

    #[test]
    fn z_score_by_hand() {
        let stats = NormStats::fit(&[with_visual0(&[0.0, 2.0])], DEFAULT_STD_FLOOR).unwrap();
        let i = VISUAL_OFFSET;
        assert_eq!(stats.mean[i], 1.0);
        assert_eq!(stats.std[i], 1.0);
        let mut row = ndarray::Array1::zeros(FRAME_DIM);
        row[i] = 3.0;
        stats.normalize_static(row.view_mut());
        assert_eq!(row[i], 2.0);
    }

    #[test]
    fn constant_dimension_uses_floor() {
        let stats = NormStats::fit(&[with_visual0(&[0.0, 2.0])], DEFAULT_STD_FLOOR).unwrap();
        // shape[0] is constant (0) across training
        assert_eq!(stats.std[SHAPE_OFFSET], DEFAULT_STD_FLOOR);
        assert!(stats.is_floored(SHAPE_OFFSET));
        let prepared = PreparedSequence::new(&with_visual0(&[0.0, 2.0]), Arc::new(stats)).unwrap();
        assert!(prepared.static_rows.column(SHAPE_OFFSET).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(NormStats::fit(&[], DEFAULT_STD_FLOOR).is_err());
    }
}

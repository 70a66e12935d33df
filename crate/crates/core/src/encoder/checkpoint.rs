//! Checkpoint directory: `manifest.json` (config, normalization floor, array
//! descriptors) plus `params.f32`, a single little-endian f32 blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::features::NormStats;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.f32";

const NORM_MEAN: &str = "norm.mean";
const NORM_STD: &str = "norm.std";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayDescriptor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the blob, in bytes.
    pub offset: usize,
    /// Length in bytes.
    pub length: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub dtype: String,
    pub blob: String,
    pub config: EncoderConfig,
    pub std_floor: f64,
    pub arrays: Vec<ArrayDescriptor>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: EncoderConfig,
    pub params: EncoderParams,
    pub norm: NormStats,
}

fn push_array(
    name: &str,
    shape: Vec<usize>,
    values: impl Iterator<Item = f64>,
    blob: &mut Vec<u8>,
    arrays: &mut Vec<ArrayDescriptor>,
) {
    let offset = blob.len();
    for v in values {
        blob.extend_from_slice(&(v as f32).to_le_bytes());
    }
    arrays.push(ArrayDescriptor {
        name: name.to_string(),
        shape,
        offset,
        length: blob.len() - offset,
    });
}

pub fn save(dir: &Path, config: &EncoderConfig, params: &EncoderParams, norm: &NormStats) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::new();
    let mut arrays = Vec::new();
    for (name, t) in params.tensors() {
        push_array(&name, t.shape().to_vec(), t.iter().copied(), &mut blob, &mut arrays);
    }
    push_array(NORM_MEAN, vec![norm.mean.len()], norm.mean.iter().copied(), &mut blob, &mut arrays);
    push_array(NORM_STD, vec![norm.std.len()], norm.std.iter().copied(), &mut blob, &mut arrays);
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        dtype: "f32le".into(),
        blob: BLOB_FILE.into(),
        config: config.clone(),
        std_floor: norm.std_floor,
        arrays,
    };
    let blob_path = dir.join(BLOB_FILE);
    fs::write(&blob_path, &blob).map_err(|e| Error::io(&blob_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

fn read_values(blob: &[u8], d: &ArrayDescriptor, path: &Path) -> Result<Vec<f64>> {
    let expected: usize = d.shape.iter().product::<usize>() * 4;
    if d.length != expected {
        return Err(Error::format(
            path,
            format!("array `{}` declares {} bytes for shape {:?}", d.name, d.length, d.shape),
        ));
    }
    let end = d.offset.checked_add(d.length).filter(|&e| e <= blob.len());
    let end = end.ok_or_else(|| {
        Error::format(path, format!("array `{}` runs past the end of the blob", d.name))
    })?;
    Ok(blob[d.offset..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub fn load(dir: &Path) -> Result<Checkpoint> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported checkpoint version {}", manifest.format_version),
        ));
    }
    manifest.config.validate()?;
    let blob_path = dir.join(&manifest.blob);
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;

    let find = |name: &str| {
        manifest
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::format(&manifest_path, format!("missing array `{name}`")))
    };

    let mut params = EncoderParams::zeros(&manifest.config);
    for (name, mut t) in params.tensors_mut() {
        let desc = find(&name)?;
        if desc.shape != t.shape() {
            return Err(Error::format(
                &manifest_path,
                format!("array `{name}` has shape {:?}, expected {:?}", desc.shape, t.shape()),
            ));
        }
        let values = read_values(&blob, desc, &blob_path)?;
        t.iter_mut().zip(values).for_each(|(dst, v)| *dst = v);
    }
    let mean = read_values(&blob, find(NORM_MEAN)?, &blob_path)?;
    let std = read_values(&blob, find(NORM_STD)?, &blob_path)?;
    if mean.len() != std.len() {
        return Err(Error::format(&manifest_path, "normalization arrays differ in length"));
    }
    Ok(Checkpoint {
        config: manifest.config,
        params,
        norm: NormStats {
            mean,
            std,
            std_floor: manifest.std_floor,
        },
    })
}

//! Run configuration: one file (TOML or JSON) with a section per module,
//! `--set section.key=value` overrides, and a resolved copy in `run.json`.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use motion_manifold::benchstats::StudyConfig;
use motion_manifold::encoder::EncoderConfig;
use motion_manifold::features::DEFAULT_STD_FLOOR;
use motion_manifold::training::TrainConfig;
use motion_manifold::windows::DEFAULT_OVERLAP;
use motion_manifold::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub overlap: usize,
    pub std_floor: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            overlap: DEFAULT_OVERLAP,
            std_floor: DEFAULT_STD_FLOOR,
            val_fraction: 0.0,
            test_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub classes: usize,
    pub videos_per_class: usize,
    pub frames: usize,
    pub fps: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            videos_per_class: 20,
            frames: 96,
            fps: 30.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `encoder.seed`, `training.seed` and the synthesis seed when set.
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub encoder: EncoderConfig,
    pub training: TrainConfig,
    pub study: StudyConfig,
}

impl RunConfig {
    pub fn synth_seed(&self) -> u64 {
        self.seed.unwrap_or(self.training.seed)
    }

    fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.encoder.seed = s;
            self.training.seed = s;
        }
    }
}

fn parse_file(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        let t: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        serde_json::to_value(t).context("converting TOML")
    }
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `a.b.c = value`, refusing keys that are not already present.
fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("`{}` is not a section", parts[..i].join(".")))?;
        if !obj.contains_key(*part) {
            bail!("unknown configuration key `{key}`");
        }
        node = obj.get_mut(*part).unwrap();
    }
    *node = parse_scalar(raw);
    Ok(())
}

/// Defaults, then the config file, then `--set` overrides, then `--seed`.
pub fn resolve(file: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg: RunConfig = match file {
        Some(p) => serde_json::from_value(parse_file(p)?)
            .map_err(|e| anyhow!(Error::Config(format!("{}: {e}", p.display()))))?,
        None => RunConfig::default(),
    };
    if !overrides.is_empty() {
        let mut v = serde_json::to_value(&cfg)?;
        for o in overrides {
            let (k, val) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{o}` must look like key=value"))?;
            set_path(&mut v, k.trim(), val.trim())?;
        }
        cfg = serde_json::from_value(v).map_err(|e| anyhow!(Error::Config(e.to_string())))?;
    }
    if seed.is_some() {
        cfg.seed = seed;
    }
    cfg.apply_seed();
    cfg.encoder.validate()?;
    cfg.training.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let c = resolve(None, &["training.epochs=3".into(), "encoder.d_model=32".into()], Some(9)).unwrap();
        assert_eq!(c.training.epochs, 3);
        assert_eq!(c.encoder.d_model, 32);
        assert_eq!(c.training.seed, 9);
        assert!(resolve(None, &["training.nope=1".into()], None).is_err());
        assert!(resolve(None, &["training.epochs".into()], None).is_err());
    }

    #[test]
    fn toml_file_with_unknown_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.toml");
        fs::write(&good, "[training]\nepochs = 4\n[data]\noverlap = 4\n").unwrap();
        let c = resolve(Some(&good), &[], None).unwrap();
        assert_eq!((c.training.epochs, c.data.overlap), (4, 4));
        let bad = dir.path().join("bad.toml");
        fs::write(&bad, "[training]\nepochz = 4\n").unwrap();
        assert!(resolve(Some(&bad), &[], None).is_err());
    }
}

//! Learned action-manifold metrics for generated human-action videos.
//!
//! The crate covers the whole path from per-frame human-centric features to
//! scores:
//!
//! - [`features`]: the frame feature contract, motion derivation, normalization
//! - [`windows`]: fixed-length temporal windows and temporal distortions
//! - [`encoder`]: two-pathway conv blocks, attention fusion, transformer
//! - [`training`]: supervised-contrastive plus hard-negative objective, AdamW
//! - [`metrics`]: class centroids, action consistency, temporal coherence, NMI
//! - [`benchstats`]: subjective-study screening, MOS, Spearman, win ratios
//! - [`synthdata`]: synthetic skeletal motion and the feature file format
//! - [`report`]: CSV / JSON / SVG emission

pub mod benchstats;
pub mod encoder;
pub mod error;
pub mod features;
pub mod metrics;
pub mod report;
pub mod synthdata;
pub mod training;
pub mod windows;

pub use error::{Error, Result};

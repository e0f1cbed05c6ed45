//! Experiment configuration (versioned JSON, unknown keys rejected) and
//! named seed-stream derivation.
//!
//! All randomness flows from the single experiment seed through named
//! sub-streams so each component can be reproduced in isolation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::federation::FederationConfig;
use crate::nn::model::ModelKind;
use crate::partitions::SchemeParams;
use crate::pimage::PiConfig;
use crate::screening::DiagramMetric;

pub const CONFIG_VERSION: u32 = 1;

/// Derives a named sub-stream from the master seed (FNV-1a over the seed
/// bytes and the tag).
pub fn seed_stream(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in master.to_le_bytes().iter().chain(tag.as_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Generated disk/annulus data; train/test seeds derive from the
    /// experiment seed, overriding the generator's own seed field.
    Synthetic { spec: SyntheticSpec, test_per_class: usize },
    Fmnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Cifar10 { train_batches: Vec<PathBuf>, test_batches: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub clients: usize,
    pub scheme: SchemeParams,
}

fn default_metrics() -> Vec<DiagramMetric> {
    vec![
        DiagramMetric::Bottleneck,
        DiagramMetric::Wasserstein2,
        DiagramMetric::PiEuclidean,
        DiagramMetric::PiCosine,
    ]
}

fn default_n_pairs() -> usize {
    200
}

fn default_pca_k() -> usize {
    8
}

fn default_screen_samples() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenConfig {
    pub model: ModelKind,
    /// Candidate blocks to score (must be non-empty).
    pub blocks: Vec<String>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<DiagramMetric>,
    #[serde(default = "default_n_pairs")]
    pub n_pairs: usize,
    #[serde(default = "default_pca_k")]
    pub pca_k: usize,
    /// Class-stratified sample drawn from the training split for screening.
    #[serde(default = "default_screen_samples")]
    pub sample_count: usize,
    #[serde(default)]
    pub pi: PiConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub federation: Option<FederationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenConfig>,
    /// Desk-scale stratified subsampling applied after loading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_subsample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_subsample: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let must_exist = |p: &Path| -> Result<()> {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("referenced file does not exist: {}", p.display())))
            }
        };
        match &self.dataset {
            DatasetConfig::Synthetic { spec, test_per_class } => {
                spec.validate()?;
                if *test_per_class == 0 {
                    return Err(Error::Config("test_per_class must be positive".into()));
                }
            }
            DatasetConfig::Fmnist { train_images, train_labels, test_images, test_labels } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    must_exist(p)?;
                }
            }
            DatasetConfig::Cifar10 { train_batches, test_batches } => {
                if train_batches.is_empty() {
                    return Err(Error::Config("cifar10 needs at least one train batch".into()));
                }
                for p in train_batches.iter().chain(test_batches) {
                    must_exist(p)?;
                }
            }
        }
        if let Some(f) = &self.federation {
            f.validate()?;
        }
        if let Some(s) = &self.screen {
            if s.blocks.is_empty() {
                return Err(Error::Config("screening needs at least one candidate block".into()));
            }
            if s.metrics.is_empty() {
                return Err(Error::Config("screening needs at least one metric".into()));
            }
            if s.n_pairs == 0 || s.pca_k == 0 || s.sample_count == 0 {
                return Err(Error::Config("screening counts must be positive".into()));
            }
            s.pi.validate()?;
        }
        if let Some(p) = &self.partition {
            if p.clients == 0 {
                return Err(Error::Config("partition needs at least one client".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_streams_differ_by_tag_and_master() {
        assert_ne!(seed_stream(1, "partition"), seed_stream(1, "init"));
        assert_ne!(seed_stream(1, "partition"), seed_stream(2, "partition"));
        assert_eq!(seed_stream(7, "pairs"), seed_stream(7, "pairs"));
    }

    fn minimal_json() -> String {
        r#"{
            "version": 1,
            "seed": 42,
            "dataset": {
                "kind": "synthetic",
                "spec": {
                    "image_size": 28,
                    "disk_radius": [5.5, 9.0],
                    "annulus_outer_radius": [7.0, 10.0],
                    "annulus_thickness": [3.0, 4.5],
                    "annulus_dip_depth": [0.3, 0.34],
                    "noise": 0.0,
                    "count_per_class": 50,
                    "seed": 0
                },
                "test_per_class": 20
            }
        }"#
        .to_string()
    }

    #[test]
    fn config_round_trip_is_identity() {
        let cfg = ExperimentConfig::from_json(&minimal_json()).unwrap();
        let text = cfg.to_json().unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = minimal_json().replacen("\"seed\": 42,", "\"seed\": 42, \"sede\": 1,", 1);
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let bad = minimal_json().replacen("\"version\": 1", "\"version\": 3", 1);
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn missing_files_rejected() {
        let cfg = r#"{
            "version": 1,
            "seed": 1,
            "dataset": {
                "kind": "fmnist",
                "train_images": "/nonexistent/a",
                "train_labels": "/nonexistent/b",
                "test_images": "/nonexistent/c",
                "test_labels": "/nonexistent/d"
            }
        }"#;
        assert!(ExperimentConfig::from_json(cfg).is_err());
    }
}

//! Scenario configuration: versioned JSON with every pipeline constant
//! overridable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Where the stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    /// Deterministic Gaussian concept stream.
    Synthetic {
        samples_per_concept: usize,
        feature_dim: usize,
        drift_magnitude: f64,
        anomaly_offset: f64,
    },
    /// One labeled CSV; concepts are discovered by clustering.
    Csv {
        path: PathBuf,
        label_column: String,
        normal_value: String,
    },
    /// One labeled CSV per concept, already concept-aligned.
    ConceptCsvs {
        paths: Vec<PathBuf>,
        label_column: String,
        normal_value: String,
    },
}

/// Pipeline variant: the full system, the frozen baseline, or one of the two
/// single-component ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Drift-scored hierarchical memory plus KL-optimized forgetting/sampling.
    Full,
    /// Train once on the first task and never update.
    Static,
    /// KL-optimized forgetting/sampling over a flat buffer, no hierarchy.
    SsfOnly,
    /// Hierarchical memory only; incoming data is admitted wholesale.
    HmOnly,
}

impl Default for Variant {
    fn default() -> Self {
        Variant::Full
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::Full => "full",
            Variant::Static => "static",
            Variant::SsfOnly => "ssf-only",
            Variant::HmOnly => "hm-only",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub source: DataSource,
    pub variant: Variant,
    /// Number of concepts / tasks (c).
    pub concepts: usize,
    /// Features retained by the ranking; clamped to the data dimension.
    pub top_k: usize,
    pub grid_dim: usize,
    pub mask_ratio: f64,
    pub epochs: usize,
    pub latent_dim: usize,
    pub memory_capacity: usize,
    pub forget_quota: usize,
    pub sample_quota: usize,
    pub histogram_bins: usize,
    pub drift_alpha: f64,
    pub level_lambda: f64,
    pub level_max: usize,
    pub memory_gamma: f64,
    pub lof_neighbors: usize,
    pub lof_threshold: f64,
    pub variance_threshold: f64,
    pub train_fraction: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA_VERSION,
            source: DataSource::Synthetic {
                samples_per_concept: 400,
                feature_dim: 8,
                drift_magnitude: 1.5,
                anomaly_offset: 6.0,
            },
            variant: Variant::Full,
            concepts: 5,
            top_k: 31,
            grid_dim: 8,
            mask_ratio: 0.75,
            epochs: 20,
            latent_dim: 16,
            memory_capacity: 5000,
            forget_quota: 1000,
            sample_quota: 1000,
            histogram_bins: 20,
            drift_alpha: 0.05,
            level_lambda: 5.5,
            level_max: 10,
            memory_gamma: 2.0,
            lof_neighbors: 20,
            lof_threshold: 1.5,
            variance_threshold: 0.95,
            train_fraction: 0.7,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported config schema {}", self.schema)));
        }
        if self.concepts < 2 {
            return Err(Error::invalid("a scenario needs at least 2 concepts"));
        }
        if self.top_k == 0 || self.top_k > self.grid_dim * self.grid_dim {
            return Err(Error::invalid("top_k must fit the grid"));
        }
        if self.forget_quota >= self.memory_capacity || self.sample_quota >= self.memory_capacity {
            return Err(Error::invalid("quotas must be smaller than the memory capacity"));
        }
        if self.grid_dim < 4 {
            return Err(Error::invalid("grid_dim must be at least 4"));
        }
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return Err(Error::invalid("mask_ratio must be in [0, 1)"));
        }
        if !(0.0 < self.train_fraction && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must be in (0, 1)"));
        }
        if self.memory_gamma <= 1.0 {
            return Err(Error::invalid("memory_gamma must exceed 1"));
        }
        if self.level_max == 0 || self.level_lambda <= 0.0 {
            return Err(Error::invalid("level parameters must be positive"));
        }
        if let DataSource::ConceptCsvs { paths, .. } = &self.source {
            if paths.len() != self.concepts {
                return Err(Error::invalid(format!(
                    "{} concept files given but {} concepts configured",
                    paths.len(),
                    self.concepts
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad config json: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = ScenarioConfig::default();
        let json = cfg.to_json().unwrap();
        assert_eq!(ScenarioConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"seed": 9}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.concepts, 5);
        assert_eq!(cfg.memory_capacity, 5000);
        assert_eq!(cfg.variant, Variant::Full);
    }

    #[test]
    fn bad_schema_is_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"schema": 99}"#).is_err());
    }

    #[test]
    fn quota_at_capacity_is_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.forget_quota = cfg.memory_capacity;
        assert!(cfg.validate().is_err());
    }
}

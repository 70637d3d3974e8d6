//! Engine configuration, read from TOML.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected so typos surface as configuration errors.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{AnomalyConfig, OverlapRule};
use crate::detection::{DEFAULT_MIN_SCORE, DEFAULT_VEHICLE_CLASSES};
use crate::kinematics::KinematicsConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub vehicle_classes: Vec<i64>,
    pub min_score: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { vehicle_classes: DEFAULT_VEHICLE_CLASSES.to_vec(), min_score: DEFAULT_MIN_SCORE }
    }
}

impl DetectionConfig {
    pub fn allowlist(&self) -> BTreeSet<i64> {
        self.vehicle_classes.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Frames either side of a ground-truth collision within which an event counts.
    pub truth_window: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { truth_window: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Use the legacy overlap rule whose vertical term is `|a.y + b.y|`.
    pub strict_paper_mode: bool,
    pub detection: DetectionConfig,
    pub tracker: TrackerConfig,
    pub kinematics: KinematicsConfig,
    pub anomaly: AnomalyConfig,
    pub eval: EvalConfig,
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn overlap_rule(&self) -> OverlapRule {
        if self.strict_paper_mode {
            OverlapRule::CenterSum
        } else {
            OverlapRule::Corrected
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(0.0..=1.0).contains(&self.detection.min_score) {
            return invalid(format!("detection.min_score {} outside [0, 1]", self.detection.min_score));
        }
        if self.tracker.max_match_distance.is_nan() || self.tracker.max_match_distance <= 0.0 {
            return invalid("tracker.max_match_distance must be positive".into());
        }
        if self.tracker.history_len < 2 {
            return invalid("tracker.history_len must be at least 2".into());
        }
        let k = &self.kinematics;
        if !(k.fps > 0.0 && k.fps.is_finite()) {
            return invalid(format!("kinematics.fps must be positive, got {}", k.fps));
        }
        if k.interval < 1 {
            return invalid("kinematics.interval must be at least 1".into());
        }
        if k.min_traj_magnitude.is_nan() || k.min_traj_magnitude < 0.0 {
            return invalid("kinematics.min_traj_magnitude must be non-negative".into());
        }
        self.anomaly.validate().map_err(|e| ConfigError::Invalid(format!("anomaly: {e}")))
    }
}

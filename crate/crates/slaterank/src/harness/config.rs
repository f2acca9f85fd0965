//! Run configuration: one JSON document, command-line dotted overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SyntheticSpec;
use crate::losses::LossSpec;
use crate::model::ModelConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config '{path}': {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {reason}")]
    Invalid { reason: String },
    #[error("bad --set override '{expr}': {reason}")]
    BadOverride { expr: String, reason: String },
}

/// Where the three splits come from: LETOR files or a synthetic generator.
/// Exactly one of the two forms must be filled in.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub valid: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Generate data in memory instead of reading files. Produces
    /// `n_slates` training slates plus a quarter as many (at least one)
    /// for each of validation and test.
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Multiplier applied to the learning rate at each epoch listed in
    /// `decay_at_epochs` (1-based, checked at the start of the epoch).
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    #[serde(default)]
    pub decay_at_epochs: Vec<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: default_lr(),
            epochs: default_epochs(),
            decay_factor: default_decay_factor(),
            decay_at_epochs: Vec::new(),
        }
    }
}

fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    50
}
fn default_decay_factor() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// Which scorer to train. `mlp` is the pointwise baseline whose parameter
/// count is matched to the attention model described by the `model` section,
/// for like-for-like comparisons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Attention,
    Mlp,
}

/// The complete recipe for a run. Serialized back out verbatim (with
/// overrides applied) next to the run's outputs so every result is
/// reproducible from its own directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataConfig,
    /// `model.output_dim` is derived from the loss at training time
    /// (ordinal losses need `n_levels - 1` outputs); any value given here
    /// is overwritten.
    pub model: ModelConfig,
    #[serde(default)]
    pub model_kind: ModelKind,
    pub loss: LossSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Slates per optimizer step.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_precision")]
    pub precision: Precision,
    /// Training slate length: longer slates are subsampled, shorter ones
    /// padded. Validation and test slates are never subsampled.
    #[serde(rename = "l", default = "default_slate_length")]
    pub slate_length: usize,
    /// NDCG cutoffs to report.
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<usize>,
    /// Standardize features to zero mean / unit variance using training
    /// statistics.
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Folds for the re-ranking pipeline's base-score cross-fitting.
    #[serde(default = "default_rerank_folds")]
    pub rerank_folds: usize,
}

fn default_batch_size() -> usize {
    16
}
fn default_seed() -> u64 {
    42
}
fn default_precision() -> Precision {
    Precision::F64
}
fn default_slate_length() -> usize {
    30
}
fn default_cutoffs() -> Vec<usize> {
    vec![1, 5, 10]
}
fn default_true() -> bool {
    true
}
fn default_rerank_folds() -> usize {
    5
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key.path=value` overrides. The path must name an existing
    /// field (serialized name, so `model.N`, not `model.n_blocks`); the
    /// value is parsed as JSON, falling back to a plain string, so
    /// `loss.kind=listnet`, `model.p_drop=0.25` and
    /// `optimizer.decay_at_epochs=[30,40]` all work.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), ConfigError> {
        if sets.is_empty() {
            return Ok(());
        }
        let bad = |expr: &str, reason: String| ConfigError::BadOverride {
            expr: expr.to_string(),
            reason,
        };
        let mut root = serde_json::to_value(&*self)?;
        for expr in sets {
            let (path, raw) = expr
                .split_once('=')
                .ok_or_else(|| bad(expr, "expected key.path=value".into()))?;
            let leaf: serde_json::Value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            let segments: Vec<&str> = path.split('.').collect();
            let (last, parents) = segments.split_last().expect("split produces one segment");
            let mut cursor = &mut root;
            for (i, segment) in parents.iter().enumerate() {
                let next = cursor
                    .as_object_mut()
                    .ok_or_else(|| bad(expr, format!("'{}' is not an object", segments[..i].join("."))))?
                    .get_mut(*segment)
                    .ok_or_else(|| bad(expr, format!("no such field '{segment}'")))?;
                if next.is_null() {
                    return Err(bad(
                        expr,
                        format!("'{segment}' is unset; assign it a whole JSON object instead"),
                    ));
                }
                cursor = next;
            }
            let slot = cursor
                .as_object_mut()
                .ok_or_else(|| bad(expr, format!("'{}' is not an object", parents.join("."))))?
                .get_mut(*last)
                .ok_or_else(|| bad(expr, format!("no such field '{last}'")))?;
            *slot = leaf;
        }
        *self = serde_json::from_value(root).map_err(|e| ConfigError::Invalid {
            reason: format!("after overrides: {e}"),
        })?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |reason: String| Err(ConfigError::Invalid { reason });
        match (&self.data.synthetic, &self.data.train, &self.data.valid, &self.data.test) {
            (Some(_), None, None, None) => {}
            (None, Some(_), Some(_), Some(_)) => {}
            (Some(_), _, _, _) => {
                return invalid("data: give either synthetic or file paths, not both".into())
            }
            _ => return invalid("data: need synthetic, or all of train/valid/test paths".into()),
        }
        if let Some(spec) = &self.data.synthetic {
            if spec.d_f != self.model.d_f {
                return invalid(format!(
                    "synthetic d_f = {} disagrees with model d_f = {}",
                    spec.d_f, self.model.d_f
                ));
            }
        }
        self.model.validate().map_err(|e| ConfigError::Invalid {
            reason: e.to_string(),
        })?;
        self.loss.validate().map_err(|e| ConfigError::Invalid {
            reason: e.to_string(),
        })?;
        if self.batch_size == 0 {
            return invalid("batch_size must be at least 1".into());
        }
        if self.slate_length == 0 {
            return invalid("l (slate length) must be at least 1".into());
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return invalid("cutoffs must be non-empty and positive".into());
        }
        if !(self.optimizer.lr.is_finite() && self.optimizer.lr > 0.0) {
            return invalid(format!("lr must be positive, got {}", self.optimizer.lr));
        }
        if !(self.optimizer.decay_factor.is_finite() && self.optimizer.decay_factor > 0.0) {
            return invalid(format!(
                "decay_factor must be positive, got {}",
                self.optimizer.decay_factor
            ));
        }
        Ok(())
    }
}

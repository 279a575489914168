//! Run configuration: a JSON file, overridable by flags, validated before
//! any work starts.

use std::fmt;
use std::path::{Path, PathBuf};

use akws_core::features::{PretrainConfig, SynthSpec};
use akws_core::rng::Xoshiro256StarStar;
use akws_core::Activation;
use serde::{Deserialize, Serialize};

/// A configuration problem, located by its field path.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.path, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; data, split, expansion and extractor seeds derive from it.
    pub seed: u64,
    pub gamma: f64,
    pub expansion: usize,
    pub activation: Activation,
    pub data: DataSource,
    pub split: SplitConfig,
    /// `null` skips pretraining and expands the raw features.
    pub extractor: Option<ExtractorConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gamma: 0.1,
            expansion: 256,
            activation: Activation::Relu,
            data: DataSource::Synth(SynthConfig::default()),
            split: SplitConfig::default(),
            extractor: Some(ExtractorConfig::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synth(SynthConfig),
    /// Task manifest; its task list is the split.
    Manifest(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise: f64,
    pub test_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            per_class: 100,
            dim: 16,
            separation: 4.0,
            noise: 1.0,
            test_fraction: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            n_classes: self.classes,
            samples_per_class: self.per_class,
            raw_dim: self.dim,
            cluster_separation: self.separation,
            noise_sigma: self.noise,
            seed,
        }
    }

    fn validate(&self, at: &str) -> Result<(), ConfigError> {
        let field = |name: &str| format!("{at}.{name}");
        if self.classes < 2 {
            return Err(ConfigError::new(field("classes"), format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.per_class == 0 {
            return Err(ConfigError::new(field("per_class"), "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(ConfigError::new(field("dim"), "must be at least 1"));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(ConfigError::new(field("separation"), "must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(ConfigError::new(field("noise"), "must be non-negative"));
        }
        let n_test = (self.per_class as f64 * self.test_fraction).round() as usize;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) || n_test == 0 || n_test >= self.per_class {
            return Err(ConfigError::new(
                field("test_fraction"),
                format!("must leave train and test samples out of {} per class", self.per_class),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Base-task class count; half the classes when absent.
    pub base: Option<usize>,
    pub per_step: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            base: None,
            per_step: 1,
        }
    }
}

impl SplitConfig {
    /// `(base, steps)` for `classes` classes.
    pub fn layout(&self, classes: usize) -> Result<(usize, usize), ConfigError> {
        let base = self.base.unwrap_or(classes / 2);
        if base == 0 || base > classes {
            return Err(ConfigError::new("split.base", format!("must be between 1 and {classes}")));
        }
        if self.per_step == 0 {
            return Err(ConfigError::new("split.per_step", "must be at least 1"));
        }
        if (classes - base) % self.per_step != 0 {
            return Err(ConfigError::new(
                "split.per_step",
                format!("{} remaining classes do not divide into steps of {}", classes - base, self.per_step),
            ));
        }
        Ok((base, (classes - base) / self.per_step))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 20,
            lr: 0.05,
            batch_size: 32,
        }
    }
}

/// Seeds for each randomized component, derived from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seeds {
    pub data: u64,
    pub split: u64,
    pub expansion: u64,
    pub extractor: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().to_string())
        })
    }

    pub fn seeds(&self) -> Seeds {
        let pick = |stream| Xoshiro256StarStar::derive(self.seed, stream).next_u64();
        Seeds {
            data: pick(10),
            split: pick(11),
            expansion: pick(12),
            extractor: pick(13),
        }
    }

    pub fn pretrain(&self) -> Option<PretrainConfig> {
        self.extractor.as_ref().map(|e| PretrainConfig {
            hidden: e.hidden,
            epochs: e.epochs,
            lr: e.lr,
            seed: self.seeds().extractor,
            batch_size: e.batch_size,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ConfigError::new("gamma", format!("must be positive and finite, got {}", self.gamma)));
        }
        if self.expansion == 0 {
            return Err(ConfigError::new("expansion", "must be at least 1"));
        }
        if let Some(e) = &self.extractor {
            if e.hidden == 0 {
                return Err(ConfigError::new("extractor.hidden", "must be at least 1"));
            }
            if e.epochs == 0 {
                return Err(ConfigError::new("extractor.epochs", "must be at least 1"));
            }
            if !(e.lr > 0.0 && e.lr.is_finite()) {
                return Err(ConfigError::new("extractor.lr", "must be positive"));
            }
            if e.batch_size == 0 {
                return Err(ConfigError::new("extractor.batch_size", "must be at least 1"));
            }
        }
        if let DataSource::Synth(s) = &self.data {
            s.validate("data.synth")?;
            self.split.layout(s.classes)?;
        }
        let feature_dim = match (&self.extractor, &self.data) {
            (Some(e), _) => Some(e.hidden),
            (None, DataSource::Synth(s)) => Some(s.dim),
            (None, DataSource::Manifest(_)) => None,
        };
        if let Some(d) = feature_dim {
            if self.expansion <= d {
                return Err(ConfigError::new(
                    "expansion",
                    format!("must exceed the feature dimension {d}, got {}", self.expansion),
                ));
            }
        }
        Ok(())
    }
}

//! Run configuration: one TOML file holding every setting of a training run.
//!
//! ```toml
//! model_name = "CNN"
//! data_root = "data/chest-ct"
//! output_dir = "runs/cnn"
//!
//! [train]
//! learning_rate = 0.01
//! epochs = 50
//! batch_size = 13
//! seed = 1000
//! ```
//!
//! Omitted sections take their defaults. Relative paths resolve against the
//! directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use lungcnn::data::{ClassMapping, PreprocessOptions, SplitRatios};
use lungcnn::layers::ModelSpec;
use lungcnn::metrics::MetricConventions;
use lungcnn::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_model_name")]
    pub model_name: String,
    pub data_root: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub preprocess: PreprocessOptions,
    #[serde(default)]
    pub metrics: MetricConventions,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub dataset: ClassMapping,
}

fn default_model_name() -> String {
    "CNN".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/cnn")
}

/// Command-line replacements for config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn with_data_root(data_root: impl Into<PathBuf>) -> Self {
        RunConfig {
            model_name: default_model_name(),
            data_root: data_root.into(),
            output_dir: default_output_dir(),
            train: TrainConfig::default(),
            split: SplitRatios::default(),
            preprocess: PreprocessOptions::default(),
            metrics: MetricConventions::default(),
            model: ModelSpec::default(),
            dataset: ClassMapping::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data_root = resolve(base, &cfg.data_root);
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(epochs) = o.epochs {
            self.train.epochs = epochs;
        }
        if let Some(b) = o.batch_size {
            self.train.batch_size = b;
        }
        if let Some(d) = &o.data_dir {
            self.data_root = d.clone();
        }
        if let Some(d) = &o.out {
            self.output_dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_name.trim().is_empty() {
            return Err(CliError::Config("model_name is empty".into()));
        }
        self.train.validate()?;
        self.split.validate()?;
        let t = self.metrics.recall_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Config(format!("metrics.recall_threshold {t} not in (0, 1)")));
        }
        self.model
            .shape_trace()
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
        if self.model.input_size != self.preprocess.size {
            return Err(CliError::Config(format!(
                "model.input_size {} differs from preprocess.size {}",
                self.model.input_size, self.preprocess.size
            )));
        }
        if self.model.in_channels != self.preprocess.channels() {
            return Err(CliError::Config(format!(
                "model.in_channels {} but preprocessing emits {} channel(s)",
                self.model.in_channels,
                self.preprocess.channels()
            )));
        }
        let mut labels: Vec<usize> = self.dataset.classes.iter().map(|c| c.label).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels != (0..self.model.classes).collect::<Vec<_>>() {
            return Err(CliError::Config(format!(
                "class labels {labels:?} must be exactly 0..{} for a {}-class model",
                self.model.classes, self.model.classes
            )));
        }
        Ok(())
    }

    /// SHA-256 of everything that shapes the trained parameters. Locations
    /// (data root, output directory) are excluded so a moved run still
    /// matches.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut canonical = self.clone();
        canonical.data_root = PathBuf::new();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&json).into()
    }

    /// Short stable identifier derived from the fingerprint.
    pub fn run_id(&self) -> String {
        hex::encode(&self.fingerprint()[..8])
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::parse("data_root = \"d\"").unwrap();
        assert_eq!(cfg, RunConfig::with_data_root("d"));
        assert_eq!(cfg.train.epochs, 50);
        assert_eq!(cfg.train.batch_size, 13);
        assert_eq!(cfg.train.seed, 1000);
        cfg.validate().unwrap();
    }

    #[test]
    fn shipped_config_is_the_default() {
        let cfg = RunConfig::parse(include_str!("../../../configs/cnn.toml")).unwrap();
        let mut want = RunConfig::with_data_root("../data/chest-ct");
        want.output_dir = "../runs/cnn".into();
        assert_eq!(cfg, want);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::with_data_root("/data");
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::parse("data_root = \"d\"\n[train]\nlr = 1").is_err());
    }

    #[test]
    fn channel_mismatch_rejected() {
        let mut cfg = RunConfig::with_data_root("d");
        cfg.preprocess.grayscale = false;
        assert!(cfg.validate().is_err());
        cfg.model.in_channels = 3;
        cfg.validate().unwrap();
    }

    #[test]
    fn fingerprint_ignores_locations_and_tracks_seed() {
        let a = RunConfig::with_data_root("a");
        let mut b = RunConfig::with_data_root("b");
        b.output_dir = "elsewhere".into();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.train.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::with_data_root("d");
        cfg.apply(&Overrides {
            seed: Some(7),
            epochs: Some(2),
            batch_size: Some(4),
            data_dir: Some("x".into()),
            out: Some("y".into()),
        });
        assert_eq!((cfg.train.seed, cfg.train.epochs, cfg.train.batch_size), (7, 2, 4));
        assert_eq!(cfg.data_root, PathBuf::from("x"));
        assert_eq!(cfg.output_dir, PathBuf::from("y"));
    }
}

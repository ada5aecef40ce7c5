//! JSON run configuration. Values resolve as flag > file > preset > default.
//!
//! ```json
//! {
//!   "dataset": {"synthetic": {"n": 1000, "k": 5, "latent_dim": 10, "views": [...], "cluster_separation": 4.0}},
//!   "normalization": "minmax",
//!   "preset": "Caltech5V7",
//!   "train": {"batch_size": 128, "mechanism": "bestother", "weight_mode": "dual"},
//!   "out": "runs/demo",
//!   "repeats": 5
//! }
//! ```
//!
//! A dataset `path` is resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use dwcl::data::{generate_synthetic, load_dataset, normalize, MultiViewDataset, Normalization, SyntheticSpec};
use dwcl::trainer::{RunMode, TrainConfig};
use dwcl::weights::{Mechanism, WeightMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DataSource,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "one")]
    pub repeats: usize,
    /// Arms of an ablation grid; unused by `train`.
    #[serde(default = "all_mechanisms")]
    pub mechanisms: Vec<Mechanism>,
    #[serde(default = "all_weight_modes")]
    pub weight_modes: Vec<WeightMode>,
    #[serde(default = "one")]
    pub jobs: usize,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}

fn one() -> usize {
    1
}

fn all_mechanisms() -> Vec<Mechanism> {
    Mechanism::ALL.to_vec()
}

fn all_weight_modes() -> Vec<WeightMode> {
    WeightMode::ALL.to_vec()
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mechanism: Option<Mechanism>,
    pub weights: Option<WeightMode>,
    pub mode: Option<RunMode>,
    pub repeats: Option<usize>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let mut cfg = Self::from_value(value)?;
        if let DataSource::Path(p) = &mut cfg.dataset {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves the `train` section on top of the preset (if any) or defaults.
    pub fn from_value(mut value: Value) -> Result<Self> {
        let obj = value.as_object_mut().ok_or_else(|| anyhow!("config must be a JSON object"))?;
        let base = match obj.get("preset").and_then(Value::as_str) {
            Some(name) => TrainConfig::preset(name).ok_or_else(|| anyhow!("unknown preset {name:?}"))?,
            None => TrainConfig::default(),
        };
        let mut train = serde_json::to_value(base)?;
        if let Some(file_train) = obj.remove("train") {
            merge(&mut train, file_train);
        }
        obj.insert("train".into(), train);
        Ok(serde_json::from_value(value)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.train.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(m) = o.mechanism {
            self.train.mechanism = m;
            self.mechanisms = vec![m];
        }
        if let Some(w) = o.weights {
            self.train.weight_mode = w;
            self.weight_modes = vec![w];
        }
        if let Some(m) = o.mode {
            self.train.mode = m;
        }
        if let Some(r) = o.repeats {
            self.repeats = r;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            bail!("repeats must be >= 1");
        }
        if self.jobs == 0 {
            bail!("jobs must be >= 1");
        }
        if self.mechanisms.is_empty() || self.weight_modes.is_empty() {
            bail!("ablation grid needs at least one mechanism and one weight mode");
        }
        self.train.validate()?;
        Ok(())
    }

    /// Loads (or generates) and normalizes the dataset.
    pub fn dataset(&self) -> Result<MultiViewDataset> {
        let raw = match &self.dataset {
            DataSource::Path(p) => load_dataset(p).with_context(|| format!("loading dataset {}", p.display()))?,
            DataSource::Synthetic(spec) => generate_synthetic(spec)?,
        };
        Ok(normalize(&raw, self.normalization))
    }
}

/// Recursively overlays `patch` onto `base`; objects merge, anything else replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

//! Run configuration: a single versioned JSON document wiring dataset
//! bundles to the training, fine-tuning, and experiment settings.
//!
//! Relative dataset paths resolve against `MENTOR_DATA_DIR` when that
//! variable is set, else against the working directory. Validation
//! collects every problem instead of stopping at the first.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Ablation, FinetuneConfig};
use crate::trainer::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "MENTOR_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratios: (0.04, 0.16, 0.80), seed: 0 }
    }
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub sources: Vec<PathBuf>,
    pub target: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_ablations")]
    pub ablations: Vec<Ablation>,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_ablations() -> Vec<Ablation> {
    vec![Ablation::Full]
}

fn default_n_runs() -> usize {
    5
}

fn default_jobs() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let raw = std::fs::read_to_string(path)
            .map_err(|_| Error::Format(format!("missing or unreadable config {}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Resolves a dataset path against `MENTOR_DATA_DIR` when relative.
    pub fn resolve_data_path(path: &Path) -> PathBuf {
        if path.is_absolute() {
            return path.to_path_buf();
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(root) => PathBuf::from(root).join(path),
            None => path.to_path_buf(),
        }
    }

    pub fn resolved_sources(&self) -> Vec<PathBuf> {
        self.sources.iter().map(|p| Self::resolve_data_path(p)).collect()
    }

    pub fn resolved_target(&self) -> Option<PathBuf> {
        self.target.as_ref().map(|p| Self::resolve_data_path(p))
    }

    /// Collects every schema violation. `need_data` adds the dataset-path
    /// checks (generation commands run without datasets).
    pub fn violations(&self, need_data: bool) -> Vec<String> {
        let mut out = Vec::new();
        if self.version != CONFIG_VERSION {
            out.push(format!(
                "version: expected {CONFIG_VERSION}, got {}",
                self.version
            ));
        }
        if need_data {
            if self.sources.is_empty() {
                out.push("sources: at least one source bundle is required".into());
            }
            for (i, p) in self.resolved_sources().iter().enumerate() {
                if !p.is_dir() {
                    out.push(format!("sources[{i}]: no bundle directory at {}", p.display()));
                }
            }
            match self.resolved_target() {
                None => out.push("target: a target bundle path is required".into()),
                Some(p) if !p.is_dir() => {
                    out.push(format!("target: no bundle directory at {}", p.display()))
                }
                _ => {}
            }
        }
        if let Err(e) = self.train.validate() {
            out.push(e.to_string());
        }
        let (a, b, c) = self.split.ratios;
        if (a + b + c - 1.0).abs() > 1e-9 || a < 0.0 || b < 0.0 || c < 0.0 {
            out.push(format!("split.ratios: must be non-negative and sum to 1, got {:?}", self.split.ratios));
        }
        if self.n_runs == 0 {
            out.push("n_runs: must be at least 1".into());
        }
        if self.jobs == 0 {
            out.push("jobs: must be at least 1".into());
        }
        if self.finetune.epochs == 0 && self.finetune.learning_rate <= 0.0 {
            out.push("finetune.learning_rate: must be positive".into());
        }
        out
    }

    pub fn validate(&self, need_data: bool) -> Result<()> {
        let violations = self.violations(need_data);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(violations.join("; ")))
        }
    }

    /// Writes the effective configuration snapshot next to a command's
    /// outputs.
    pub fn write_snapshot(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join("config.json");
        let mut json = serde_json::to_string_pretty(self).expect("config serializes");
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

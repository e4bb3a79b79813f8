//! Experiment configuration files and the artifact manifest.
//!
//! Perturbation budgets in configs and CSV outputs are expressed in
//! /255-normalized pixel units: a config value of 8 means 8/255 in raw
//! input coordinates.

use robustot::data::{self, Dataset};
use robustot::defense::DefenseConfig;
use robustot::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const PIXEL_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DatasetSpec {
    TwoGaussians { n_per_class: usize, separation: f64, noise: f64, seed: u64 },
    TwoMoons { n_per_class: usize, noise: f64, seed: u64 },
    Cifar10 { paths: Vec<PathBuf>, subset_per_class: usize, seed: u64 },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::TwoGaussians { n_per_class, separation, noise, seed } => {
                data::two_gaussians(*n_per_class, *separation, *noise, *seed)
            }
            DatasetSpec::TwoMoons { n_per_class, noise, seed } => {
                data::two_moons(*n_per_class, *noise, *seed)
            }
            DatasetSpec::Cifar10 { paths, subset_per_class, seed } => {
                data::load_cifar10_binary(paths, *subset_per_class, *seed)
            }
        }
    }
}

/// One experiment: a dataset and a training procedure. The defense's
/// `eps_train` field is given in /255 units here and converted on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub defense: DefenseConfig,
}

pub fn load_experiment(path: &Path, seed_override: Option<u64>) -> Result<(ExperimentConfig, String)> {
    let bytes = std::fs::read(path)?;
    let digest = hex_digest(&bytes);
    let mut config: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
    config.defense.eps_train /= PIXEL_SCALE;
    if let Some(seed) = seed_override {
        config.defense.seed = seed;
    }
    config.defense.validate()?;
    Ok((config, digest))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub id: String,
    pub tool_version: String,
    pub created_unix: u64,
    pub config_digest: String,
    pub config_path: String,
    pub checkpoint_path: Option<String>,
    pub report_paths: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl ExperimentManifest {
    pub fn new(command: &str, config_digest: &str, config_path: &Path) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ExperimentManifest {
            id: format!("{command}-{}", &config_digest[..12.min(config_digest.len())]),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            config_digest: config_digest.to_string(),
            config_path: config_path.display().to_string(),
            checkpoint_path: None,
            report_paths: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    /// All referenced files must exist before the manifest is written.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        for p in self.checkpoint_path.iter().chain(self.report_paths.iter()) {
            if !Path::new(p).exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("manifest references missing file {p}"),
                )));
            }
        }
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self).unwrap())?;
        Ok(())
    }
}

/// Comma-separated budgets in /255 units, nonnegative and strictly
/// increasing, e.g. "0,2,4,8".
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for tok in s.split(',') {
        let v: f64 = tok
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("grid entry {tok:?} is not a number")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput(format!("grid entry {v} out of range")));
        }
        if let Some(&last) = grid.last() {
            if v <= last {
                return Err(Error::InvalidInput("grid must increase strictly".into()));
            }
        }
        grid.push(v);
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("grid is empty".into()));
    }
    Ok(grid)
}

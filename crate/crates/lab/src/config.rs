use std::path::{Path, PathBuf};

use robust_duality::Tolerances;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LabError;

/// Seed used when neither the config nor the command line gives one.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DUALITY_LAB_OUT";
pub const DEFAULT_OUT: &str = "lab-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Main input file, relative to the config file.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Experiment-specific parameters.
    #[serde(default)]
    pub params: serde_json::Value,
}

/// A parsed config with paths resolved and the seed fixed.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub base_dir: PathBuf,
    pub seed: u64,
    pub hash: String,
}

impl LoadedConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let config: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| LabError::config(format!("{}: {e}", path.display())))?,
            Some("json") => {
                serde_json::from_str(&text).map_err(|e| LabError::config(format!("{}: {e}", path.display())))?
            }
            _ => {
                return Err(LabError::config(format!(
                    "{}: config must have a .toml or .json extension",
                    path.display()
                )))
            }
        };
        config
            .tolerances
            .validate()
            .map_err(|e| LabError::config(e.to_string()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let seed = seed_override.or(config.seed).unwrap_or(DEFAULT_SEED);
        let hash = config_hash(&config, seed)?;
        Ok(LoadedConfig {
            config,
            path: path.to_path_buf(),
            base_dir,
            seed,
            hash,
        })
    }

    /// Resolves a path from the config relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The `input` file, which must exist.
    pub fn input(&self) -> Result<PathBuf, LabError> {
        let p = self
            .config
            .input
            .as_ref()
            .ok_or_else(|| LabError::config(format!("experiment {} needs an `input` file", self.config.experiment)))?;
        let full = self.resolve(p);
        if !full.is_file() {
            return Err(LabError::io(
                &full,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            ));
        }
        Ok(full)
    }

    pub fn params<T: DeserializeOwned + Default>(&self) -> Result<T, LabError> {
        if self.config.params.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.config.params.clone())
            .map_err(|e| LabError::config(format!("params for {}: {e}", self.config.experiment)))
    }

    /// `--out`, then the config's `output`, then the environment, then the default.
    pub fn output_root(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Some(p) = &self.config.output {
            return self.resolve(p);
        }
        std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// SHA-256 of the canonical JSON form of the config with the effective seed
/// and without the output location.
pub fn config_hash(config: &ExperimentConfig, seed: u64) -> Result<String, LabError> {
    let mut c = config.clone();
    c.seed = Some(seed);
    c.output = None;
    let value = serde_json::to_value(&c).map_err(|e| LabError::Internal(e.to_string()))?;
    let bytes = serde_json::to_vec(&value).map_err(|e| LabError::Internal(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

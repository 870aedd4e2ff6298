//! JSON experiment document.
//!
//! ```json
//! {
//!   "scenario": {"kind": "illustrative"},
//!   "algorithm": ["lms", "multitask", "atc"],
//!   "grid": [{"mu": 0.01, "eta": 0.1}],
//!   "n_trials": 100,
//!   "n_iters": 2000,
//!   "seed": 1,
//!   "theory": true,
//!   "require_stable": false,
//!   "output_dir": "out"
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{Algorithm, ExperimentSpec, GridPoint, HarnessError, ScenarioSpec};
use crate::theory::DEFAULT_SIZE_CAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmSelection {
    One(Algorithm),
    Many(Vec<Algorithm>),
}

impl AlgorithmSelection {
    pub fn to_vec(&self) -> Vec<Algorithm> {
        match self {
            AlgorithmSelection::One(a) => vec![*a],
            AlgorithmSelection::Many(v) => v.clone(),
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_iters() -> usize {
    2000
}

fn yes() -> bool {
    true
}

fn default_size_cap() -> usize {
    DEFAULT_SIZE_CAP
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub algorithm: AlgorithmSelection,
    pub grid: Vec<GridPoint>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_iters")]
    pub n_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub theory: bool,
    /// Treat any diverged trial as a failure.
    #[serde(default)]
    pub require_stable: bool,
    /// Largest allowed (LN)² for theory evaluations.
    #[serde(default = "default_size_cap")]
    pub size_cap: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] HarnessError),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let config = serde_json::from_slice(&bytes)?;
        Ok((config, bytes))
    }

    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            scenario: self.scenario.clone(),
            algorithms: self.algorithm.to_vec(),
            grid: self.grid.clone(),
            n_trials: self.n_trials,
            n_iters: self.n_iters,
            seed: self.seed,
            theory: self.theory,
            size_cap: self.size_cap,
        }
    }

    /// Schema-level checks plus building the scenario (which validates the
    /// network and combiners).
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.spec().check()?;
        self.scenario.build()?;
        Ok(())
    }
}

//! Experiment configuration and seed derivation.
//!
//! Configs are TOML documents with flat keys; see `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{Method, DEFAULT_ACTION_REPEAT};
use crate::envs::{EnvName, EnvSpec};
use crate::error::{Error, Result};
use crate::model::TrainConfig;
use crate::ns::NsConfig;
use crate::seed::derive_seed;

/// Environment variable naming the default output root.
pub const OUT_ENV_VAR: &str = "BOOTSTRAP_BENCH_OUT";
pub const DEFAULT_OUT_ROOT: &str = "results";

const SUITE_TAG: u64 = 1;
const GATHER_TAG: u64 = 2;
const FIT_TAG: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvName,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    /// Prediction horizons; `[1, 20, H]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    pub repetitions: usize,
    pub action_repeat: usize,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Frozen evaluation suite to load instead of running Novelty Search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite_file: Option<PathBuf>,
    pub train: TrainConfig,
    pub ns: NsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvName::BallInCup,
            methods: Method::ALL.to_vec(),
            budgets: vec![5, 10, 15, 20],
            horizons: None,
            repetitions: 10,
            action_repeat: DEFAULT_ACTION_REPEAT,
            master_seed: 0,
            out_dir: None,
            suite_file: None,
            train: TrainConfig::default(),
            ns: NsConfig::default(),
        }
    }
}

/// One unit of work in the experiment grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub method: Method,
    pub budget: usize,
    pub repetition: usize,
}

impl CellKey {
    /// File stem used for the cell's artifacts.
    pub fn stem(&self) -> String {
        format!("{}_b{}_r{}", self.method, self.budget, self.repetition)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub gather: u64,
    pub fit: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSeeds {
    pub evolve: u64,
    pub sample: u64,
}

impl ExperimentConfig {
    pub fn for_env(env: EnvName) -> Self {
        ExperimentConfig {
            env,
            ..ExperimentConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn spec(&self) -> EnvSpec {
        EnvSpec::new(self.env)
    }

    pub fn horizons(&self) -> Vec<usize> {
        match &self.horizons {
            Some(h) => h.clone(),
            None => vec![1, 20, self.spec().horizon],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec();
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("method {m} listed twice")));
            }
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(Error::Config("budgets must be a non-empty list of positive integers".into()));
        }
        let horizons = self.horizons();
        if horizons.is_empty() {
            return Err(Error::Config("horizons must not be empty".into()));
        }
        if let Some(h) = horizons.iter().find(|&&h| h == 0 || h > spec.horizon) {
            return Err(Error::Config(format!(
                "horizon {h} outside 1..={} for {}",
                spec.horizon, self.env
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.action_repeat == 0 || !spec.horizon.is_multiple_of(self.action_repeat) {
            return Err(Error::Config(format!(
                "action_repeat {} does not divide the horizon {}",
                self.action_repeat, spec.horizon
            )));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(Error::Config("master_seed must be below 2^63".into()));
        }
        self.train.validate()?;
        self.ns.validate()
    }

    /// Output directory: explicit override, then the config, then
    /// `$BOOTSTRAP_BENCH_OUT/<env>`, then `results/<env>`.
    pub fn resolve_out_dir(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        let root = std::env::var_os(OUT_ENV_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
        root.join(self.env.as_str())
    }

    /// Grid cells in canonical order: repetition, method, budget.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for repetition in 0..self.repetitions {
            for &method in &self.methods {
                for &budget in &self.budgets {
                    cells.push(CellKey {
                        method,
                        budget,
                        repetition,
                    });
                }
            }
        }
        cells
    }

    pub fn suite_seeds(&self) -> SuiteSeeds {
        SuiteSeeds {
            evolve: derive_seed(self.master_seed, &[SUITE_TAG, 0]),
            sample: derive_seed(self.master_seed, &[SUITE_TAG, 1]),
        }
    }

    pub fn cell_seeds(&self, cell: &CellKey) -> CellSeeds {
        let path = [cell.repetition as u64, cell.method.code(), cell.budget as u64];
        CellSeeds {
            gather: derive_seed(self.master_seed, &[&[GATHER_TAG][..], &path].concat()),
            fit: derive_seed(self.master_seed, &[&[FIT_TAG][..], &path].concat()),
        }
    }

    /// Digest of everything that determines cell results; the output
    /// location is excluded.
    pub fn digest(&self) -> String {
        let canonical = ExperimentConfig {
            out_dir: None,
            ..self.clone()
        };
        let mut hasher = Sha256::new();
        hasher.update(canonical.to_toml().as_bytes());
        hex::encode(hasher.finalize())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

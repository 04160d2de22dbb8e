//! Run configuration: a strict TOML document mirroring the model
//! parameters plus harness knobs. Unknown keys are rejected so a typo
//! never silently falls back to a default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelParams;
use crate::rng;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad config: {0}")]
    Invalid(String),
}

fn default_theta() -> f64 {
    1.0
}

fn default_trials() -> usize {
    20
}

fn default_target() -> f64 {
    0.9
}

fn default_out_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_items: usize,
    pub n_users: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub affinity: Vec<Vec<f64>>,
    pub rated_per_user: usize,
    pub epsilon: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub algorithms: Vec<String>,
    pub users: Vec<usize>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub items: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_target")]
    pub target: f64,
    /// Questions per user for the multi-question release; defaults to
    /// `max(1, ceil(epsilon))` when absent.
    #[serde(default)]
    pub questions: Option<usize>,
    pub model: ModelSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.model_params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.trials == 0 {
            return Err(ConfigError::Invalid("trials is 0".into()));
        }
        if !(0.0..=1.0).contains(&self.target) {
            return Err(ConfigError::Invalid(format!(
                "target {} outside [0, 1]",
                self.target
            )));
        }
        if self.questions == Some(0) {
            return Err(ConfigError::Invalid("questions is 0".into()));
        }
        let out = Path::new(&self.out_dir);
        if !out.exists() {
            let parent_ok = match out.parent() {
                Some(p) if p.as_os_str().is_empty() => true,
                Some(p) => p.exists(),
                None => true,
            };
            if !parent_ok {
                return Err(ConfigError::Invalid(format!(
                    "out_dir {} is not creatable (missing parent)",
                    self.out_dir
                )));
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            n_items: self.model.n_items,
            n_users: self.model.n_users,
            alpha: self.model.alpha.clone(),
            beta: self.model.beta.clone(),
            affinity: self.model.affinity.clone(),
            rated_per_user: self.model.rated_per_user,
            epsilon: self.model.epsilon,
            theta: self.model.theta,
        }
    }

    /// Serialization with every default filled in; hashing this makes the
    /// provenance header insensitive to formatting of the input file.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        format!("{:016x}", rng::fnv1a(self.canonical_toml().as_bytes()))
    }
}

/// A commented starter config, parseable as-is.
pub fn sample_config() -> String {
    let sample = r#"# ldp-lab run configuration.
# Unknown keys are rejected; defaults shown here are what you get when a
# key with a default is left out.

seed = 42
out_dir = "out"        # default "out"
trials = 20            # default 20
target = 0.9           # default 0.9
# questions = 2        # multi-question release only; default max(1, ceil(epsilon))

[model]
n_items = 60
n_users = 50000
alpha = [0.5, 0.5]                        # user class weights, sum to 1
beta = [0.5, 0.5]                         # item class weights, sum to 1
affinity = [[0.9, 0.1], [0.2, 0.8]]       # affinity[k][l] = P[class-k user rates class-l item 1]
rated_per_user = 10
epsilon = 1.0
theta = 1.0            # default 1.0, expected sensed-and-rated items per query

[sweep]                # optional; only the sweep subcommand reads it
algorithms = ["maxsense", "pairwise"]
users = [10000, 20000, 40000]
epsilons = []          # empty means just model.epsilon
items = []             # empty means just model.n_items
"#;
    sample.to_string()
}

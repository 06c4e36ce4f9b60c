//! Experiment runner, theoretical-bound evaluators, coverage studies, and
//! the pieces behind the `otbandit` CLI.
//!
//! A JSON [`ExperimentConfig`] names a synthetic environment, an agent
//! configuration, a horizon and a repetition count. [`runner::run_experiment`]
//! executes the repetitions (in parallel, one derived noise stream each) and
//! produces per-round [`runner::RunRecord`]s; [`bounds`] evaluates the regret
//! bound formulas on realized runs; [`coverage`] measures simultaneous
//! confidence-set coverage; [`export`] writes CSV/JSON/SVG.

pub mod bounds;
pub mod coverage;
pub mod export;
pub mod runner;
pub mod verify;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{BanditError, EntUcbConfig};
use crate::env::{
    make_matching_env, make_parametric_env, make_smooth_env, BanditEnv, CostGen, EnvError,
};
use crate::measures::{CostTable, DiscreteMeasure, MeasureError};
use crate::table::Table;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] BanditError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Declarative environment description (the JSON `env` block).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSpec {
    Matching { k: usize, kp: usize, cost_gen: CostGen, sigma: f64, seed: u64 },
    Smooth { k: usize, kp: usize, q: f64, scale: f64, sigma: f64, seed: u64 },
    Parametric {
        mu: MeasureSpec,
        nu: MeasureSpec,
        embeddings: Vec<Table>,
        theta_star: Vec<f64>,
        sigma: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl EnvSpec {
    pub fn build(&self) -> Result<BanditEnv, HarnessError> {
        let env = match self {
            EnvSpec::Matching { k, kp, cost_gen, sigma, seed } => {
                make_matching_env(*k, *kp, *cost_gen, *sigma, *seed)?
            }
            EnvSpec::Smooth { k, kp, q, scale, sigma, seed } => {
                make_smooth_env(*k, *kp, *q, *scale, *sigma, *seed)?
            }
            EnvSpec::Parametric { mu, nu, embeddings, theta_star, sigma, seed } => {
                let mu = DiscreteMeasure::new(mu.points.clone(), mu.weights.clone())?;
                let nu = DiscreteMeasure::new(nu.points.clone(), nu.weights.clone())?;
                let embeddings = embeddings
                    .iter()
                    .map(|t| CostTable::new(t.clone()).map_err(HarnessError::from))
                    .collect::<Result<Vec<_>, _>>()?;
                make_parametric_env(mu, nu, embeddings, theta_star.clone(), *sigma, *seed)?
            }
        };
        Ok(env)
    }
}

/// Which optional per-round quantities get computed and stored.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Compute the entropic excess at the round's `ε_t` even when the
    /// schedule decays (one cached baseline per distinct `ε_t`).
    #[serde(default)]
    pub entropic_excess_at_eps_t: bool,
    /// Record the realized width-determinant per round for bound reports.
    #[serde(default = "default_true")]
    pub bound_report: bool,
}

fn default_true() -> bool {
    true
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics { entropic_excess_at_eps_t: false, bound_report: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub agent: EntUcbConfig,
    pub horizon: usize,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon == 0 {
            return Err(HarnessError::Config("horizon must be >= 1".into()));
        }
        if self.reps == 0 {
            return Err(HarnessError::Config("reps must be >= 1".into()));
        }
        self.agent.validate()?;
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Stable hash of the canonical JSON form.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

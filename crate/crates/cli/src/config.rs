//! JSON documents read by the runner.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mvdrc_core::rollout::{DEFAULT_HORIZON, DEFAULT_SAMPLES};
use mvdrc_core::{IterationOptions, LqSystem};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Reads and parses a JSON document. Errors name the file; syntax and type
/// errors add serde's line/column position, validation errors the invariant.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid document {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub riccati_tol: f64,
    /// Relative tolerance for Bellman-residual checks.
    pub bellman_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let opts = IterationOptions::default();
        Self {
            riccati_tol: opts.tol,
            bellman_tol: 1e-7,
            max_iter: opts.max_iter,
        }
    }
}

impl Tolerances {
    pub fn iteration(&self) -> IterationOptions {
        IterationOptions {
            max_iter: self.max_iter,
            tol: self.riccati_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub horizon: usize,
    pub num_samples: usize,
    pub num_trajectories: usize,
    /// Initial state; the origin when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            num_samples: DEFAULT_SAMPLES,
            num_trajectories: 1,
            x0: None,
        }
    }
}

/// A system plus the γ sweep and run settings shared by `figure1` and `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: LqSystem,
    pub gamma_sweep: Vec<f64>,
    /// Initial states; the origin and `e₁` when empty.
    #[serde(default)]
    pub x0_list: Vec<Vec<f64>>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulate: SimulateOptions,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let cfg: Self = load_json(path)?;
        cfg.validate()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.gamma_sweep.is_empty() {
            bail!("gamma_sweep is empty");
        }
        if let Some(g) = self.gamma_sweep.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            bail!("gamma_sweep entry {g} is not a positive finite number");
        }
        let n = self.system.state_dim();
        for (i, x0) in self.x0_list.iter().chain(self.simulate.x0.iter()).enumerate() {
            if x0.len() != n {
                bail!("initial state {i} has length {}, system has {n} states", x0.len());
            }
        }
        let t = &self.tolerances;
        if !(t.riccati_tol > 0.0 && t.bellman_tol > 0.0) || t.max_iter == 0 {
            bail!("tolerances must be positive and max_iter at least 1");
        }
        Ok(())
    }

    /// `x0_list`, or the origin and the first unit vector when none are given.
    pub fn initial_states(&self) -> Vec<Vec<f64>> {
        if !self.x0_list.is_empty() {
            return self.x0_list.clone();
        }
        let n = self.system.state_dim();
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        vec![vec![0.0; n], e1]
    }
}

/// Parses `"1, 0.5,-2"`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", s.trim())))
        .collect()
}

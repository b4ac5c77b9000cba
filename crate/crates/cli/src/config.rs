use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use uavroute::{ActiveSearchConfig, EnergyParams, GaConfig, TrainConfig};

use crate::solver::SolverSpec;

/// Which instances an experiment runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSet {
    pub ks: Vec<usize>,
    pub n: usize,
    pub area_m: f64,
    pub std_m: f64,
    /// Instances per K.
    pub count: usize,
    /// Instance `i` of every K uses seed `base_seed + i`.
    pub base_seed: u64,
}

impl Default for InstanceSet {
    fn default() -> Self {
        Self {
            ks: vec![10],
            n: 5,
            area_m: 2000.0,
            std_m: 30.0,
            count: 30,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub energy: EnergyParams,
    pub instances: InstanceSet,
    pub solvers: Vec<String>,
    /// Solver the per-K ratio table divides by; the first solver if unset.
    pub reference_solver: Option<String>,
    pub train: TrainConfig,
    pub hidden_dim: usize,
    /// Write a checkpoint every this many training steps (0 = only at the end).
    pub checkpoint_every: u64,
    pub ga: GaConfig,
    pub active: ActiveSearchConfig,
    pub checkpoint: Option<PathBuf>,
    pub workers: usize,
    /// Added to each instance seed to seed stochastic solvers.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            energy: EnergyParams::default(),
            instances: InstanceSet::default(),
            solvers: vec!["greedy".into(), "nn".into()],
            reference_solver: None,
            train: TrainConfig::default(),
            hidden_dim: 32,
            checkpoint_every: 0,
            ga: GaConfig::default(),
            active: ActiveSearchConfig::default(),
            checkpoint: None,
            workers: 1,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config, or the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn solver_specs(&self) -> Result<Vec<SolverSpec>> {
        if self.solvers.is_empty() {
            bail!("at least one solver is required");
        }
        self.solvers.iter().map(|s| s.parse()).collect()
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<()> {
        self.energy.validate()?;
        let specs = self.solver_specs()?;
        if specs.iter().any(SolverSpec::needs_checkpoint) {
            match &self.checkpoint {
                None => bail!("a neural solver was requested but no checkpoint was given"),
                Some(p) if !p.exists() => bail!("checkpoint {} does not exist", p.display()),
                Some(_) => {}
            }
        }
        if let Some(r) = &self.reference_solver {
            let r: SolverSpec = r.parse()?;
            if !specs.contains(&r) {
                bail!("reference solver `{r}` is not among the solvers");
            }
        }
        if self.workers == 0 {
            bail!("workers must be >= 1");
        }
        Ok(())
    }
}

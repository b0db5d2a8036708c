use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bounds::BoundInputs;
use crate::costs::CostSpec;
use crate::eot::SolverConfig;
use crate::measures::SamplerSpec;

/// How `C_ε(μ, ν)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// Solve the two ground-truth atom lists directly.
    #[default]
    ExactGroundTruth,
    /// Solve one independent `m`-sample pair. Biased by roughly `m^{−1/2}`.
    HighM { m: usize },
}

fn default_n_grid() -> Vec<usize> {
    (6..=11).map(|k| 1usize << k).collect()
}

fn default_replications() -> usize {
    32
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sampler_mu: SamplerSpec,
    pub sampler_nu: SamplerSpec,
    pub cost: CostSpec,
    /// Overrides `solver.epsilon`.
    pub epsilon: f64,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Collapse repeated sample points before solving. The EOT value is
    /// unchanged; atom-valued samplers shrink to at most their support size.
    #[serde(default = "yes")]
    pub merge_duplicates: bool,
    /// Multiplier applied to the bound curve in the summary.
    #[serde(default = "one")]
    pub c_global: f64,
}

const MAX_GRID: usize = 1 << 23;
const MAX_REPLICATIONS: usize = 1 << 39;

impl ExperimentConfig {
    /// Default grid, 32 replications, seed 0, exact reference.
    pub fn new(sampler_mu: SamplerSpec, sampler_nu: SamplerSpec, cost: CostSpec, epsilon: f64) -> Self {
        Self {
            sampler_mu,
            sampler_nu,
            cost,
            epsilon,
            n_grid: default_n_grid(),
            replications: default_replications(),
            seed: 0,
            reference: Reference::default(),
            solver: SolverConfig::default(),
            merge_duplicates: true,
            c_global: 1.0,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The solver settings actually used, with `epsilon` applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { epsilon: self.epsilon, ..self.solver }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        self.sampler_mu.validate()?;
        self.sampler_nu.validate()?;
        if self.sampler_mu.dim != self.sampler_nu.dim {
            return bad(format!(
                "sampler dimensions differ: {} vs {}",
                self.sampler_mu.dim, self.sampler_nu.dim
            ));
        }
        self.solver_config().validate()?;
        if self.n_grid.is_empty() || self.n_grid.len() > MAX_GRID {
            return bad(format!("n_grid must have between 1 and {MAX_GRID} entries"));
        }
        if self.n_grid[0] < 4 {
            return bad(format!("n_grid entries must be at least 4, got {}", self.n_grid[0]));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing".into());
        }
        if self.replications == 0 || self.replications > MAX_REPLICATIONS {
            return bad(format!("replications = {} out of range", self.replications));
        }
        if !(self.c_global > 0.0 && self.c_global.is_finite()) {
            return bad(format!("c_global = {} must be positive", self.c_global));
        }
        let max_n = *self.n_grid.last().unwrap();
        match self.reference {
            Reference::ExactGroundTruth => {
                if self.sampler_mu.ground_truth().is_none() || self.sampler_nu.ground_truth().is_none() {
                    return bad("exact_ground_truth needs two discrete_atoms samplers".into());
                }
            }
            Reference::HighM { m } => {
                if m < 4 * max_n {
                    return bad(format!("high_m reference needs m ≥ 4·{max_n}, got {m}"));
                }
            }
        }
        Ok(())
    }

    /// Bound inputs at sample size `n`, carrying this config's `c_global`.
    pub fn bound_inputs(&self, n: usize) -> BoundInputs {
        BoundInputs {
            c_global: self.c_global,
            ..BoundInputs::new(
                self.sampler_mu.profile.clone(),
                self.sampler_nu.profile.clone(),
                &self.cost,
                self.epsilon,
                n as u64,
            )
        }
    }
}

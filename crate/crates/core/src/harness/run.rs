use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{fit_rate, RateFit};
use super::config::{ExperimentConfig, Reference};
use super::{nullable, HarnessError};
use crate::bounds::theorem1_bound;
use crate::eot::{solve, solve_matrix};
use crate::measures::{empirical, sample_with, stream_rng, DiscreteMeasure, PointCloud, SamplerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub n: usize,
    pub replicate: usize,
    pub empirical_value: f64,
    pub reference_value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub n: usize,
    pub replicate: usize,
    pub message: String,
}

/// NaN (serialized as `null`) when every cell at this `n` failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    #[serde(with = "nullable")]
    pub mean_error: f64,
    #[serde(with = "nullable")]
    pub std_error: f64,
    #[serde(with = "nullable")]
    pub bound_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: Metadata,
    pub per_cell: Vec<CellRecord>,
    pub summary: Vec<SummaryRow>,
    /// `None` when the fit is degenerate, e.g. all errors zero.
    pub rate: Option<RateFit>,
    pub failures: Vec<FailedCell>,
}

impl ExperimentResult {
    /// Fraction of cells whose solve failed.
    pub fn failure_rate(&self) -> f64 {
        let total = self.per_cell.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / total as f64
        }
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(s)?)
    }
}

const REFERENCE_STREAM: u64 = 1 << 63;

/// Stream of one marginal in one cell; distinct from every other cell and
/// from the reference streams.
fn cell_stream(n_index: usize, replicate: usize, marginal: u64) -> u64 {
    ((n_index as u64) << 40) | ((replicate as u64) << 1) | marginal
}

fn draw(spec: &SamplerSpec, n: usize, seed: u64, stream: u64, merge: bool) -> Result<DiscreteMeasure, HarnessError> {
    let points = sample_with(spec, n, &mut stream_rng(seed, stream))?;
    let m = empirical(points)?;
    Ok(if merge { m.merge_duplicates() } else { m })
}

struct ReferenceData {
    value: f64,
    support_mu: PointCloud,
    support_nu: PointCloud,
}

fn reference(cfg: &ExperimentConfig) -> Result<ReferenceData, HarnessError> {
    let (mu, nu) = match cfg.reference {
        Reference::ExactGroundTruth => {
            let missing = || HarnessError::InvalidConfig("exact_ground_truth needs atom lists".into());
            let mu = cfg.sampler_mu.ground_truth().ok_or_else(missing)?.clone();
            let nu = cfg.sampler_nu.ground_truth().ok_or_else(missing)?.clone();
            (mu, nu)
        }
        Reference::HighM { m } => (
            draw(&cfg.sampler_mu, m, cfg.seed, REFERENCE_STREAM, cfg.merge_duplicates)?,
            draw(&cfg.sampler_nu, m, cfg.seed, REFERENCE_STREAM | 1, cfg.merge_duplicates)?,
        ),
    };
    let value = solve(&mu, &nu, &cfg.cost, &cfg.solver_config())?.value;
    Ok(ReferenceData {
        value,
        support_mu: mu.support(),
        support_nu: nu.support(),
    })
}

/// Supports fed to the bound: the ground-truth atoms, or the high-m reference
/// sample as a proxy.
pub fn reference_supports(cfg: &ExperimentConfig) -> Result<(PointCloud, PointCloud), HarnessError> {
    cfg.validate()?;
    match cfg.reference {
        Reference::ExactGroundTruth => {
            let r = |s: &SamplerSpec| s.ground_truth().map(DiscreteMeasure::support);
            Ok((r(&cfg.sampler_mu).unwrap(), r(&cfg.sampler_nu).unwrap()))
        }
        Reference::HighM { m } => Ok((
            draw(&cfg.sampler_mu, m, cfg.seed, REFERENCE_STREAM, true)?.support(),
            draw(&cfg.sampler_nu, m, cfg.seed, REFERENCE_STREAM | 1, true)?.support(),
        )),
    }
}

fn run_cell(cfg: &ExperimentConfig, n_index: usize, replicate: usize, reference_value: f64) -> Result<CellRecord, String> {
    let n = cfg.n_grid[n_index];
    let cell = || -> Result<f64, HarnessError> {
        let mu = draw(&cfg.sampler_mu, n, cfg.seed, cell_stream(n_index, replicate, 0), cfg.merge_duplicates)?;
        let nu = draw(&cfg.sampler_nu, n, cfg.seed, cell_stream(n_index, replicate, 1), cfg.merge_duplicates)?;
        let c = cfg.cost.matrix(&mu, &nu)?;
        Ok(solve_matrix(mu.weights(), nu.weights(), c, &cfg.solver_config())?.value)
    };
    let empirical_value = cell().map_err(|e| e.to_string())?;
    Ok(CellRecord {
        n,
        replicate,
        empirical_value,
        reference_value,
        abs_error: (empirical_value - reference_value).abs(),
    })
}

fn summarize(n: usize, cells: &[CellRecord], bound_value: f64) -> SummaryRow {
    let k = cells.len();
    let errors: Vec<f64> = cells.iter().map(|c| c.abs_error).collect();
    let mean_error = if k == 0 { f64::NAN } else { errors.iter().sum::<f64>() / k as f64 };
    let std_error = match k {
        0 => f64::NAN,
        1 => 0.0,
        _ => {
            let var = errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        }
    };
    SummaryRow { n, mean_error, std_error, bound_value }
}

/// Runs every `(n, replicate)` cell on the current rayon pool.
///
/// Output depends only on the config: each cell seeds its own stream and the
/// per-cell table comes back in grid order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let reference = reference(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.n_grid.len())
        .flat_map(|i| (0..cfg.replications).map(move |r| (i, r)))
        .collect();
    let outcomes: Vec<Result<CellRecord, String>> = jobs
        .par_iter()
        .map(|&(i, r)| run_cell(cfg, i, r, reference.value))
        .collect();

    let mut per_cell = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (&(i, replicate), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(cell) => per_cell.push(cell),
            Err(message) => failures.push(FailedCell { n: cfg.n_grid[i], replicate, message }),
        }
    }

    let mut summary = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let cells: Vec<CellRecord> = per_cell.iter().filter(|c| c.n == n).copied().collect();
        let bound = theorem1_bound(&cfg.bound_inputs(n), &reference.support_mu, &reference.support_nu)?;
        summary.push(summarize(n, &cells, bound.total));
    }

    let mut result = ExperimentResult {
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
        },
        per_cell,
        summary,
        rate: None,
        failures,
    };
    result.rate = fit_rate(&result).ok();
    Ok(result)
}

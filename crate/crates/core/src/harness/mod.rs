//! Monte Carlo estimation of `E|C_ε(μ_n, ν_n) − C_ε(μ, ν)|` over a grid of
//! sample sizes, rate fitting, bound comparison and result export.

pub mod checks;
mod analysis;
mod config;
mod io;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::bounds::BoundError;
use crate::costs::CostError;
use crate::eot::EotError;
use crate::measures::MeasureError;

pub use analysis::{compare_to_bound, fit_log_log, fit_rate, BoundComparison, BoundPair, RateFit};
pub use config::{ExperimentConfig, Reference};
pub use io::{
    export, import_csv, import_json, write_plot_tsv, ExportFormat, PER_CELL_FILE, PLOT_FILE, RESULT_FILE,
    SUMMARY_FILE,
};
pub use run::{reference_supports, run_experiment, CellRecord, ExperimentResult, FailedCell, Metadata, SummaryRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Eot(#[from] EotError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

/// `f64` as a JSON number, with NaN written as `null` and read back.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

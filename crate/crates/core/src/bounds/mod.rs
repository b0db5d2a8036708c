//! Closed-form quantities of the sample-complexity analysis: truncation radii,
//! gamma and moment envelopes, stability and coupling bounds, and the main
//! bound with its corollaries.
//!
//! Every bound carries the unspecified constant as an explicit multiplier
//! `c_global` (default 1), so outputs are curves "up to constants".

pub mod gamma;
mod tails;
mod theorem;
mod transport;

use thiserror::Error;

use crate::costs::CostError;
use crate::eot::EotError;
use crate::measures::MeasureError;

pub use gamma::{gamma_tail_check, incomplete_gamma, ln_gamma, log_linear_check, GammaTailReport, LogLinearReport};
pub use tails::{
    binomial_constant_half, binomial_constant_quarter, binomial_sum_check, moment_bound, truncation_choice_check,
    truncation_radius, BinomialReport, TruncationChoiceReport,
};
pub use theorem::{
    corollary_bound, fluctuation_diagnostic, theorem1_bound, BoundBreakdown, BoundInputs, CorollaryBound, CorollaryKind,
    CorollaryParams, FluctuationTerms,
};
pub use transport::{
    calibrated_stability_constant, exact_transport, stability_constant, stability_gap_check, truncation_wp_bound,
    wasserstein_pp, ExactPlan, StabilityReport, EXACT_ATOM_LIMIT,
};

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("{check}: argument {value} is below the admissible threshold {threshold}")]
    DomainViolation {
        check: &'static str,
        value: f64,
        threshold: f64,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),
    #[error("exact transport oracle failed: {0}")]
    Oracle(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Eot(#[from] EotError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

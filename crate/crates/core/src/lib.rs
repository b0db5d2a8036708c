//! Entropic optimal transport on discrete measures, together with evaluators
//! for the sample-complexity bounds of empirical entropic OT and a Monte Carlo
//! harness that measures the convergence rate of `E|C_ε(μ_n,ν_n) − C_ε(μ,ν)|`.
//!
//! Module map:
//!
//! - [`measures`]: point clouds, discrete measures, seeded samplers, truncation.
//! - [`costs`]: radial costs `c(x,y) = h(|x−y|)` and their Lipschitz envelope.
//! - [`eot`]: log-domain Sinkhorn solver, primal/dual values, entropic density.
//! - [`covering`]: greedy covers, ball covering bounds, inverse-mass integrals.
//! - [`bounds`]: truncation radii, incomplete gamma, stability and rate bounds.
//! - [`harness`]: experiment driver, rate fitting, export and verification sweeps.

// `!(x > 0.0)` is used on purpose so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod costs;
pub mod covering;
pub mod eot;
pub mod harness;
pub mod measures;

mod decimal;

pub use costs::CostSpec;
pub use eot::{EotSolution, SolverConfig};
pub use measures::{DiscreteMeasure, PointCloud, SamplerSpec, TailProfile};

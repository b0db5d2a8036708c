//! Exact (unregularized) transport on small instances, the coupling bound on
//! `W_p(μ, μ^{B_r})^p`, and the stability inequality for the entropic value.

use ndarray::Array2;
use serde::Serialize;

use super::BoundError;
use crate::costs::CostSpec;
use crate::eot::{solve, SolverConfig};
use crate::measures::{distance, moment, moment_pow, restrict, restrict_complement, tail_mass, DiscreteMeasure};

/// Largest marginal size accepted by [`stability_gap_check`].
pub const EXACT_ATOM_LIMIT: usize = 12;

const FLOW_TOL: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct ExactPlan {
    pub value: f64,
    pub plan: Array2<f64>,
}

/// Minimizes `Σ π_ij c_ij` over couplings of `a` and `b` by successive shortest
/// augmenting paths (Bellman–Ford on the residual graph).
///
/// Intended for small problems; cost is `O((m+k)·m·k)` per augmentation.
pub fn exact_transport(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<ExactPlan, BoundError> {
    let (m, k) = cost.dim();
    if m != a.len() || k != b.len() || m == 0 || k == 0 {
        return Err(BoundError::InvalidInput(format!(
            "cost is {m}×{k} but marginals have {} and {} atoms",
            a.len(),
            b.len()
        )));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb) {
        return Err(BoundError::Oracle(format!("unbalanced marginals: {sa} vs {sb}")));
    }
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut plan = Array2::<f64>::zeros((m, k));
    let nodes = m + k;
    let mut dist = vec![f64::INFINITY; nodes];
    let mut pred: Vec<Option<usize>> = vec![None; nodes];

    for _round in 0..(4 * nodes * nodes + 16) {
        if supply.iter().all(|&s| s <= FLOW_TOL) || demand.iter().all(|&d| d <= FLOW_TOL) {
            let value = plan.iter().zip(cost.iter()).map(|(p, c)| p * c).sum();
            return Ok(ExactPlan { value, plan });
        }
        dist.fill(f64::INFINITY);
        pred.fill(None);
        for i in 0..m {
            if supply[i] > FLOW_TOL {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..m {
                if dist[i].is_infinite() {
                    continue;
                }
                for j in 0..k {
                    let cand = dist[i] + cost[[i, j]];
                    if improves(cand, dist[m + j]) {
                        dist[m + j] = cand;
                        pred[m + j] = Some(i);
                        changed = true;
                    }
                }
            }
            for j in 0..k {
                if dist[m + j].is_infinite() {
                    continue;
                }
                for i in 0..m {
                    if plan[[i, j]] > FLOW_TOL {
                        let cand = dist[m + j] - cost[[i, j]];
                        if improves(cand, dist[i]) {
                            dist[i] = cand;
                            pred[i] = Some(m + j);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..k)
            .filter(|&j| demand[j] > FLOW_TOL && dist[m + j].is_finite())
            .min_by(|&x, &y| dist[m + x].total_cmp(&dist[m + y]))
            .ok_or_else(|| BoundError::Oracle("no augmenting path".into()))?;

        // walk back to a source row with spare supply
        let mut path = vec![m + target];
        let mut node = m + target;
        while let Some(prev) = pred[node] {
            path.push(prev);
            node = prev;
            if path.len() > nodes + 1 {
                return Err(BoundError::Oracle("cycle in shortest-path tree".into()));
            }
        }
        let source = node;
        let mut amount = supply[source].min(demand[target]);
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from >= m {
                // backward arc: column `from` gives back flow on (to, from)
                amount = amount.min(plan[[to, from - m]]);
            }
        }
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from < m {
                plan[[from, to - m]] += amount;
            } else {
                plan[[to, from - m]] -= amount;
            }
        }
        supply[source] -= amount;
        demand[target] -= amount;
    }
    Err(BoundError::Oracle("augmentation limit reached".into()))
}

fn improves(cand: f64, current: f64) -> bool {
    cand < current - 1e-13 * (1.0 + cand.abs())
}

/// Exact `W_p(μ, ν)^p` for the Euclidean ground distance.
pub fn wasserstein_pp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64, BoundError> {
    if mu.dim() != nu.dim() {
        return Err(BoundError::InvalidInput(format!(
            "dimensions differ: {} vs {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let cost = Array2::from_shape_fn((mu.len(), nu.len()), |(i, j)| distance(mu.point(i), nu.point(j)).powf(p));
    Ok(exact_transport(mu.weights(), nu.weights(), &cost)?.value)
}

/// Coupling bound `2^{p−1} μ(B_r^c) (M_p(μ^{B_r})^p + M_p(μ^{B_r^c})^p)` on
/// `W_p(μ, μ^{B_r})^p`; zero when no mass lies outside the open ball.
pub fn truncation_wp_bound(m: &DiscreteMeasure, r: f64, p: f64) -> Result<f64, BoundError> {
    let inside = restrict(m, r)?;
    let tail = tail_mass(m, r);
    let Some(outside) = restrict_complement(m, r) else {
        return Ok(0.0);
    };
    Ok(2f64.powf(p - 1.0) * tail * (moment_pow(&inside, p) + moment_pow(&outside, p)))
}

/// `[M_p(μ_1) + M_p(μ_2) + M_p(μ̃_1) + M_p(μ̃_2)]^{p−1}`; the cost-dependent
/// constant multiplies it downstream.
pub fn stability_constant(measures: [&DiscreteMeasure; 4], p: f64) -> f64 {
    measures.iter().map(|m| moment(m, p)).sum::<f64>().powf(p - 1.0)
}

/// `p · C_p · 2^p`, a constant for which the stability inequality is expected to
/// hold for costs obeying the local Lipschitz envelope. Hölder and
/// `(u+v)^p ≤ 2^{p−1}(u^p+v^p)` already give `C_p 2^{(p−1)/p}`; the extra room
/// absorbs the unstated constant in the coupling step.
pub fn calibrated_stability_constant(cost: &CostSpec) -> f64 {
    cost.p() * cost.c_p() * 2f64.powf(cost.p())
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub value: f64,
    pub value_tilde: f64,
    pub gap: f64,
    /// `[W_p(μ_1,μ̃_1)^p + W_p(μ_2,μ̃_2)^p]^{1/p}`.
    pub wasserstein: f64,
    /// [`stability_constant`] of the four measures.
    pub moment_factor: f64,
    pub c_global: f64,
    /// `c_global · moment_factor · wasserstein`.
    pub bound: f64,
    /// `gap / (moment_factor · wasserstein)`: the smallest admissible constant.
    pub ratio: f64,
    pub passed: bool,
}

/// Compares `|C_ε(μ_1,μ_2) − C_ε(μ̃_1,μ̃_2)|` with `c_global · L · W_p`.
///
/// The right side does not depend on ε: applying the `ε = 1` inequality to the
/// cost `c/ε` divides `L` by ε, and the scaling identity multiplies it back.
/// Marginals are limited to [`EXACT_ATOM_LIMIT`] atoms. The comparison allows
/// `1e-9 (1 + |C_ε|)` of solver error.
pub fn stability_gap_check(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    tmu1: &DiscreteMeasure,
    tmu2: &DiscreteMeasure,
    cost: &CostSpec,
    epsilon: f64,
    c_global: f64,
) -> Result<StabilityReport, BoundError> {
    for m in [mu1, mu2, tmu1, tmu2] {
        if m.len() > EXACT_ATOM_LIMIT {
            return Err(BoundError::InvalidInput(format!(
                "{} atoms exceed the exact oracle limit of {EXACT_ATOM_LIMIT}",
                m.len()
            )));
        }
    }
    let cfg = SolverConfig {
        tolerance: 1e-13,
        max_iterations: 1_000_000,
        epsilon,
    };
    let value = solve(mu1, mu2, cost, &cfg)?.value;
    let value_tilde = solve(tmu1, tmu2, cost, &cfg)?.value;
    let gap = (value - value_tilde).abs();
    let p = cost.p();
    let w1 = wasserstein_pp(mu1, tmu1, p)?;
    let w2 = wasserstein_pp(mu2, tmu2, p)?;
    let wasserstein = (w1 + w2).max(0.0).powf(1.0 / p);
    let moment_factor = stability_constant([mu1, mu2, tmu1, tmu2], p);
    let scale = moment_factor * wasserstein;
    let slack = 1e-9 * (1.0 + value.abs());
    let ratio = if scale > 0.0 {
        gap / scale
    } else if gap <= slack {
        0.0
    } else {
        f64::INFINITY
    };
    let bound = c_global * scale;
    Ok(StabilityReport {
        value,
        value_tilde,
        gap,
        wasserstein,
        moment_factor,
        c_global,
        bound,
        ratio,
        passed: gap <= bound + slack,
    })
}

//! Randomized verification sweeps over the bound-level checks. Every sweep is
//! a pure function of its seed.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HarnessError;
use crate::bounds::{
    binomial_sum_check, calibrated_stability_constant, gamma_tail_check, incomplete_gamma, log_linear_check,
    stability_gap_check, truncation_choice_check, truncation_wp_bound, wasserstein_pp,
};
use crate::costs::{check_envelope, pointwise_bound_check, CostSpec};
use crate::covering::density_norm_bound;
use crate::eot::{density_l2_squared, potential_bounds_check, scaling_check, solve, SolverConfig};
use crate::measures::{norm, restrict, stream_rng, DiscreteMeasure, PointCloud, TailProfile};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed `lhs / rhs`; at most 1 when every case passes, except
    /// where noted on the sweep.
    pub worst: f64,
}

impl CheckOutcome {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: 0, worst: 0.0 }
    }

    fn record(&mut self, passed: bool, ratio: f64) {
        self.cases += 1;
        if !passed {
            self.failures += 1;
        }
        if ratio.is_nan() || ratio > self.worst {
            self.worst = ratio;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

/// Instance counts for the randomized sweeps.
#[derive(Debug, Clone, Copy)]
pub struct SweepSizes {
    pub potentials: usize,
    pub scaling: usize,
    pub density: usize,
    pub truncation: usize,
    pub stability: usize,
}

impl Default for SweepSizes {
    fn default() -> Self {
        Self {
            potentials: 50,
            scaling: 50,
            density: 20,
            truncation: 500,
            stability: 1000,
        }
    }
}

/// Uniform point in the ball of radius `r`.
pub fn uniform_in_ball(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        if norm(&x) < 1.0 {
            return x.into_iter().map(|v| v * r).collect();
        }
    }
}

/// Between `atoms.start()` and `atoms.end()` atoms uniform in `B_r`, with masses
/// drawn from `[0.2, 1]`.
pub fn random_measure(rng: &mut ChaCha8Rng, atoms: RangeInclusive<usize>, d: usize, r: f64) -> DiscreteMeasure {
    let k = rng.random_range(atoms);
    let rows: Vec<Vec<f64>> = (0..k).map(|_| uniform_in_ball(rng, d, r)).collect();
    let masses: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    DiscreteMeasure::from_masses(PointCloud::from_rows(&rows).unwrap(), masses).unwrap()
}

fn tight(epsilon: f64) -> SolverConfig {
    SolverConfig {
        tolerance: 1e-12,
        max_iterations: 1_000_000,
        epsilon,
    }
}

/// Local Lipschitz envelope of `h` and the pointwise bound `c ≤ C_p |x−y|^p`.
pub fn cost_envelope_sweep(seed: u64) -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("cost envelope");
    let mut rng = stream_rng(seed, 1);
    for &p in &[2.0, 3.0, 4.5] {
        let cost = CostSpec::power(p)?;
        let grid: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)))
            .collect();
        let report = check_envelope(&cost, &grid);
        out.record(report.passed(), if report.passed() { 1.0 } else { f64::INFINITY });
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
            .map(|_| (uniform_in_ball(&mut rng, 3, 3.0), uniform_in_ball(&mut rng, 3, 3.0)))
            .collect();
        let report = pointwise_bound_check(&cost, &pairs)?;
        out.record(report.passed(), report.max_ratio);
    }
    Ok(out)
}

/// `Γ(1, log x) = 1/x` on 200 points of `[e, 10^12]`, to 8 ulps.
pub fn gamma_identity_sweep() -> CheckOutcome {
    let mut out = CheckOutcome::new("gamma identity");
    let (lo, hi) = (1.0f64, 12.0 * 10f64.ln());
    for k in 0..200 {
        let x = (lo + (hi - lo) * k as f64 / 199.0).exp();
        let rel = (incomplete_gamma(1.0, x.ln()) * x - 1.0).abs() / f64::EPSILON;
        out.record(rel <= 8.0, rel / 8.0);
    }
    out
}

/// `Γ(s, (s∨1) log x) ≤ 1/x` on a 20 × 10 grid with `x ≥ 4s² ∨ e`.
pub fn gamma_tail_sweep() -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("gamma tail");
    for i in 0..20 {
        let s = 0.1 * 100f64.powf(i as f64 / 19.0);
        let threshold = (4.0 * s * s).max(std::f64::consts::E);
        for j in 0..10 {
            let x = threshold * 1e4f64.powf(j as f64 / 9.0);
            let r = gamma_tail_check(s, x)?;
            out.record(r.passed, r.value / r.bound);
        }
    }
    Ok(out)
}

/// `a log x ≤ x` on a 20 × 10 grid with `x ≥ a²`.
pub fn log_linear_sweep() -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("log-linear");
    for i in 0..20 {
        let a = 0.1 * 500f64.powf(i as f64 / 19.0);
        for j in 0..10 {
            let x = a * a * 1e3f64.powf(j as f64 / 9.0);
            let r = log_linear_check(a, x)?;
            out.record(r.passed, r.lhs / r.x);
        }
    }
    Ok(out)
}

/// Both binomial sums at `a = 1 − 2/n²` for every `n` in `4..=1024`.
pub fn binomial_sweep() -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("binomial sums");
    for n in 4u64..=1024 {
        let nf = n as f64;
        let r = binomial_sum_check(n, 1.0 - 2.0 / (nf * nf))?;
        let ratio = (r.scaled_half / r.constant_half).max(r.scaled_quarter / r.constant_quarter);
        out.record(r.passed, ratio);
    }
    Ok(out)
}

/// Both truncation targets at `r_n` over a grid of profiles and sample sizes.
pub fn truncation_choice_sweep() -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("truncation radius");
    for &c in &[0.1, 0.5, 1.0, 4.0] {
        for &alpha in &[1.0, 1.5, 2.0, 3.0] {
            let profile = TailProfile::custom(c, alpha)?;
            for &p in &[2.0, 3.0] {
                for n in [4u64, 16, 256, 4096, 1 << 16] {
                    let r = truncation_choice_check(&profile, p, n);
                    let ratio = (r.tail / r.tail_target).max(r.tail_moment / r.tail_moment_target);
                    out.record(r.passed, ratio);
                }
            }
        }
    }
    Ok(out)
}

/// Sup-norm and Lipschitz bounds of the potentials on 50-atom clouds in unit
/// balls, `p ∈ {2,3}`, `ε ∈ {0.1, 1}`, additive slack `1e-6`.
pub fn potential_sweep(seed: u64, instances: usize) -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("potential bounds");
    let mut rng = stream_rng(seed, 2);
    let settings = [(2.0, 0.1), (2.0, 1.0), (3.0, 0.1), (3.0, 1.0)];
    for k in 0..instances {
        let (p, eps) = settings[k % settings.len()];
        let d = 1 + k % 3;
        let cost = CostSpec::power(p)?;
        let mu = random_measure(&mut rng, 50..=50, d, 1.0);
        let nu = random_measure(&mut rng, 50..=50, d, 1.0);
        let sol = solve(&mu, &nu, &cost, &tight(eps))?;
        let r = potential_bounds_check(&sol, &mu, &nu, 1.0, 1.0, &cost, 1e-6)?;
        let ratio = (r.sup_f.max(r.sup_g) / r.sup_bound).max(r.lipschitz_f.max(r.lipschitz_g) / r.lipschitz_bound);
        out.record(r.passed, ratio);
    }
    Ok(out)
}

/// `C_ε(μ,ν,c) = ε C_1(μ,ν,c/ε)` to `1e-7` relative. `worst` is the largest
/// relative gap.
pub fn scaling_sweep(seed: u64, instances: usize) -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("scaling identity");
    let mut rng = stream_rng(seed, 3);
    for k in 0..instances {
        let p = if k % 2 == 0 { 2.0 } else { 3.0 };
        let eps = 0.05 * 100f64.powf(rng.random_range(0.0..1.0));
        let d = rng.random_range(1..=3);
        let mu = random_measure(&mut rng, 2..=30, d, 2.0);
        let nu = random_measure(&mut rng, 2..=30, d, 2.0);
        let r = scaling_check(&mu, &nu, &CostSpec::power(p)?, &tight(eps))?;
        out.record(r.passed, r.gap / r.direct.abs().max(f64::MIN_POSITIVE));
    }
    Ok(out)
}

/// `‖p^{r,s}‖² ≤ e^{8C_p} min N` on compactly supported instances.
pub fn density_sweep(seed: u64, instances: usize) -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("density norm");
    let mut rng = stream_rng(seed, 4);
    for k in 0..instances {
        let p = if k % 2 == 0 { 2.0 } else { 3.0 };
        let cost = CostSpec::power(p)?;
        let eps = rng.random_range(0.1..2.0);
        let (r, s) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let d = rng.random_range(1..=2);
        let mu = random_measure(&mut rng, 5..=40, d, r);
        let nu = random_measure(&mut rng, 5..=40, d, s);
        let sol = solve(&mu, &nu, &cost, &tight(eps))?;
        let norm2 = density_l2_squared(&sol);
        let bound = density_norm_bound(&mu, &nu, r, s, &cost, eps).bound;
        out.record(norm2 <= bound, norm2 / bound);
    }
    Ok(out)
}

/// Truncation bound against exact `W_p(μ, μ^{B_r})^p` for measures of at most
/// six atoms.
pub fn truncation_sweep(seed: u64, instances: usize) -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("truncation W_p");
    let mut rng = stream_rng(seed, 5);
    for k in 0..instances {
        let p = if k % 2 == 0 { 2.0 } else { 3.0 };
        let d = rng.random_range(1..=3);
        let m = random_measure(&mut rng, 1..=6, d, 3.0);
        let closest = m.points().iter().map(norm).fold(f64::INFINITY, f64::min);
        let r = closest + rng.random_range(1e-9..3.0);
        let inside = restrict(&m, r)?;
        let exact = wasserstein_pp(&m, &inside, p)?;
        let bound = truncation_wp_bound(&m, r, p)?;
        let passed = exact <= bound * (1.0 + 1e-12) + 1e-14;
        out.record(passed, if bound > 0.0 { exact / bound } else { 0.0 });
    }
    Ok(out)
}

/// Stability inequality on random quadruples with the calibrated constant.
/// `worst` is the largest `gap / bound`.
pub fn stability_sweep(seed: u64, instances: usize) -> Result<CheckOutcome, HarnessError> {
    let mut out = CheckOutcome::new("stability");
    let mut rng = stream_rng(seed, 6);
    for k in 0..instances {
        let p = if k % 2 == 0 { 2.0 } else { 3.0 };
        let cost = CostSpec::power(p)?;
        let eps = [0.1, 1.0, 10.0][k % 3];
        let d = rng.random_range(1..=2);
        let draw = |rng: &mut ChaCha8Rng| random_measure(rng, 1..=4, d, 2.0);
        let (mu1, mu2) = (draw(&mut rng), draw(&mut rng));
        let (t1, t2) = if k % 2 == 0 {
            (draw(&mut rng), draw(&mut rng))
        } else {
            // small perturbations of the same atoms
            let shift = |rng: &mut ChaCha8Rng, m: &DiscreteMeasure| {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-0.1..0.1)).collect();
                m.translate(&v)
            };
            (shift(&mut rng, &mu1), shift(&mut rng, &mu2))
        };
        let c = calibrated_stability_constant(&cost);
        let r = stability_gap_check(&mu1, &mu2, &t1, &t2, &cost, eps, c)?;
        out.record(r.passed, if r.bound > 0.0 { r.gap / r.bound } else { 0.0 });
    }
    Ok(out)
}

/// Every sweep, in a fixed order.
pub fn run_all(seed: u64, sizes: SweepSizes) -> Result<Vec<CheckOutcome>, HarnessError> {
    Ok(vec![
        cost_envelope_sweep(seed)?,
        gamma_identity_sweep(),
        gamma_tail_sweep()?,
        log_linear_sweep()?,
        binomial_sweep()?,
        truncation_choice_sweep()?,
        potential_sweep(seed, sizes.potentials)?,
        scaling_sweep(seed, sizes.scaling)?,
        density_sweep(seed, sizes.density)?,
        truncation_sweep(seed, sizes.truncation)?,
        stability_sweep(seed, sizes.stability)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_sweeps_pass() {
        for out in [
            gamma_identity_sweep(),
            gamma_tail_sweep().unwrap(),
            log_linear_sweep().unwrap(),
            binomial_sweep().unwrap(),
            truncation_choice_sweep().unwrap(),
        ] {
            assert!(out.passed(), "{out:?}");
            assert!(out.worst <= 1.0);
        }
        assert_eq!(binomial_sweep().unwrap().cases, 1021);
    }

    #[test]
    fn small_random_sweeps_pass() {
        let sizes = SweepSizes {
            potentials: 4,
            scaling: 4,
            density: 4,
            truncation: 40,
            stability: 30,
        };
        for out in run_all(11, sizes).unwrap() {
            assert!(out.passed(), "{out:?}");
        }
    }
}

//! The main sample-complexity bound and its corollaries, evaluated with explicit
//! covering counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tails::truncation_radius;
use super::BoundError;
use crate::costs::CostSpec;
use crate::covering::{ball_cover_bound, cover_count};
use crate::eot::{density_l2_squared, EotSolution};
use crate::measures::{norm, Family, PointCloud, TailProfile};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub profile_mu: TailProfile,
    pub profile_nu: TailProfile,
    pub p: f64,
    #[serde(rename = "C_p")]
    pub c_p: f64,
    pub epsilon: f64,
    pub n: u64,
    #[serde(default = "one")]
    pub c_global: f64,
}

impl BoundInputs {
    pub fn new(profile_mu: TailProfile, profile_nu: TailProfile, cost: &CostSpec, epsilon: f64, n: u64) -> Self {
        Self {
            profile_mu,
            profile_nu,
            p: cost.p(),
            c_p: cost.c_p(),
            epsilon,
            n,
            c_global: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        self.profile_mu.validate()?;
        self.profile_nu.validate()?;
        if self.n < 4 {
            return Err(BoundError::InvalidInput(format!("n = {} must be at least 4", self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(BoundError::InvalidInput(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !(self.p >= 2.0) || !(self.c_p > 0.0) {
            return Err(BoundError::InvalidInput(format!(
                "need p ≥ 2 and C_p > 0, got p = {}, C_p = {}",
                self.p, self.c_p
            )));
        }
        if !(self.c_global >= 0.0 && self.c_global.is_finite()) {
            return Err(BoundError::InvalidInput(format!("c_global = {} must be nonnegative", self.c_global)));
        }
        Ok(())
    }

    /// `(c_global/√n)(1 + c_μ^{−p/α_μ} + c_ν^{−p/α_ν})`.
    pub fn moment_term(&self) -> f64 {
        let term = |t: &TailProfile| t.c.powf(-self.p / t.alpha);
        self.c_global / (self.n as f64).sqrt() * (1.0 + term(&self.profile_mu) + term(&self.profile_nu))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub r_mu: f64,
    pub r_nu: f64,
    /// Covering scale `ε / (r_μ + r_ν)^{p−1}`.
    pub scale: f64,
    pub moment_term: f64,
    pub covering_term: f64,
    pub total: f64,
    pub covering_counts: (usize, usize),
}

impl BoundBreakdown {
    /// `√(N_μ ∧ N_ν)`.
    pub fn covering_factor(&self) -> f64 {
        (self.covering_counts.0.min(self.covering_counts.1) as f64).sqrt()
    }
}

/// Evaluates the main bound with greedy covers of `support ∩ B_{r_n}` standing in
/// for the covering numbers.
///
/// Supports are the known ground-truth supports; for sample data the sample
/// itself is the best available proxy.
pub fn theorem1_bound(
    inputs: &BoundInputs,
    support_mu: &PointCloud,
    support_nu: &PointCloud,
) -> Result<BoundBreakdown, BoundError> {
    inputs.validate()?;
    let p = inputs.p;
    let r_mu = truncation_radius(&inputs.profile_mu, p, inputs.n);
    let r_nu = truncation_radius(&inputs.profile_nu, p, inputs.n);
    let reach = r_mu + r_nu;
    let scale = inputs.epsilon / reach.powf(p - 1.0);
    let in_ball = |s: &PointCloud, r: f64| s.select(|_, x| norm(x) < r);
    let counts = (
        cover_count(&in_ball(support_mu, r_mu), scale),
        cover_count(&in_ball(support_nu, r_nu), scale),
    );
    let moment_term = inputs.moment_term();
    let factor = (counts.0.min(counts.1) as f64).sqrt();
    let covering_term =
        inputs.c_global / (inputs.n as f64).sqrt() * (inputs.epsilon + reach.powf(p)) * factor;
    Ok(BoundBreakdown {
        r_mu,
        r_nu,
        scale,
        moment_term,
        covering_term,
        total: moment_term + covering_term,
        covering_counts: counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorollaryKind {
    Subgaussian,
    SubgaussianP2,
    NuCompact,
    Semidiscrete,
    Manifold,
}

impl CorollaryKind {
    pub const ALL: [CorollaryKind; 5] = [
        CorollaryKind::Subgaussian,
        CorollaryKind::SubgaussianP2,
        CorollaryKind::NuCompact,
        CorollaryKind::Semidiscrete,
        CorollaryKind::Manifold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorollaryKind::Subgaussian => "subgaussian",
            CorollaryKind::SubgaussianP2 => "subgaussian_p2",
            CorollaryKind::NuCompact => "nu_compact",
            CorollaryKind::Semidiscrete => "semidiscrete",
            CorollaryKind::Manifold => "manifold",
        }
    }
}

impl fmt::Display for CorollaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorollaryKind {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BoundError::InvalidInput(format!("unknown corollary `{s}`")))
    }
}

/// Parameters for [`corollary_bound`]; each kind reads only the fields it needs
/// and reports the first missing one.
#[derive(Debug, Clone)]
pub struct CorollaryParams {
    pub n: u64,
    pub epsilon: f64,
    pub p: f64,
    pub c_global: f64,
    /// Subgaussian scale `σ = σ_μ ∨ σ_ν`.
    pub sigma: Option<f64>,
    pub dim: Option<usize>,
    pub profile_mu: Option<TailProfile>,
    pub support_mu: Option<PointCloud>,
    pub support_nu: Option<PointCloud>,
    /// Number of atoms of a finitely supported ν.
    pub atoms: Option<usize>,
    /// Radius of a ball around the origin containing `spt(ν)`.
    pub r_nu: Option<f64>,
    /// `M_p(ν)^p`; defaults to `r_ν^p` when only the radius is known.
    pub moment_nu: Option<f64>,
    pub manifold_dim: Option<f64>,
    /// Constant in `N(spt ν, δ) ≤ C_ν δ^{−d_ν}`.
    pub manifold_constant: Option<f64>,
}

impl CorollaryParams {
    pub fn new(n: u64, epsilon: f64, p: f64) -> Self {
        Self {
            n,
            epsilon,
            p,
            c_global: 1.0,
            sigma: None,
            dim: None,
            profile_mu: None,
            support_mu: None,
            support_nu: None,
            atoms: None,
            r_nu: None,
            moment_nu: None,
            manifold_dim: None,
            manifold_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryBound {
    pub kind: CorollaryKind,
    /// Additive moment-type term, zero when the corollary folds it in.
    pub leading: f64,
    /// Covering-dependent factor multiplying the second term.
    pub covering_factor: f64,
    pub total: f64,
}

fn need<T: Clone>(v: &Option<T>, name: &'static str) -> Result<T, BoundError> {
    v.clone().ok_or(BoundError::MissingParam(name))
}

/// Closed-form corollary bounds, all scaled by `c_global`.
pub fn corollary_bound(kind: CorollaryKind, params: &CorollaryParams) -> Result<CorollaryBound, BoundError> {
    let CorollaryParams { n, epsilon, p, c_global, .. } = *params;
    if n < 4 {
        return Err(BoundError::InvalidInput(format!("n = {n} must be at least 4")));
    }
    if !(epsilon > 0.0) || !(p >= 2.0) {
        return Err(BoundError::InvalidInput(format!("need ε > 0 and p ≥ 2, got ε = {epsilon}, p = {p}")));
    }
    let nf = n as f64;
    let pre = c_global / nf.sqrt();
    let log_n = nf.ln();

    match kind {
        CorollaryKind::Subgaussian => {
            let sigma = need(&params.sigma, "sigma")?;
            let d = need(&params.dim, "dim")?;
            let l = (d as f64 * sigma * sigma).max(1.0).powi(2) * log_n;
            let scale = epsilon / (c_global * l.powf((p - 1.0) / 2.0));
            let count = match (&params.support_mu, &params.support_nu) {
                (Some(smu), Some(snu)) => {
                    let profile = TailProfile::new(1.0 / (d as f64 * sigma * sigma), 2.0, Family::Gaussian)?;
                    let r = truncation_radius(&profile, p, n);
                    let inside = |s: &PointCloud| s.select(|_, x| norm(x) < r);
                    cover_count(&inside(smu), scale).min(cover_count(&inside(snu), scale)) as f64
                }
                _ => {
                    let profile = TailProfile::new(1.0 / (d as f64 * sigma * sigma), 2.0, Family::Gaussian)?;
                    ball_cover_bound(truncation_radius(&profile, p, n), scale, d).value
                }
            };
            let covering_factor = count.sqrt();
            Ok(CorollaryBound {
                kind,
                leading: 0.0,
                covering_factor,
                total: pre * (epsilon.max(1.0) + l.powf(p / 2.0)) * covering_factor,
            })
        }
        CorollaryKind::SubgaussianP2 => {
            if p != 2.0 {
                return Err(BoundError::InvalidInput(format!("subgaussian_p2 needs p = 2, got {p}")));
            }
            let sigma = need(&params.sigma, "sigma")?;
            let d = need(&params.dim, "dim")? as f64;
            let base = epsilon.max(1.0) + c_global * d * d * sigma.powi(4) * log_n / epsilon;
            Ok(CorollaryBound {
                kind,
                leading: 0.0,
                covering_factor: base.powf(d / 2.0),
                total: pre * base.powf(d / 2.0 + 1.0),
            })
        }
        CorollaryKind::NuCompact | CorollaryKind::Semidiscrete | CorollaryKind::Manifold => {
            let profile = need(&params.profile_mu, "profile_mu")?;
            profile.validate()?;
            let r_mu = truncation_radius(&profile, p, n);
            let support_radius = || -> Option<f64> {
                params
                    .r_nu
                    .or_else(|| params.support_nu.as_ref().map(|s| s.iter().map(norm).fold(0.0, f64::max)))
            };
            let moment_nu = params
                .moment_nu
                .or_else(|| support_radius().map(|r| r.powf(p)))
                .ok_or(BoundError::MissingParam("moment_nu"))?;
            let leading = pre * (1.0 + profile.c.powf(-p / profile.alpha) + moment_nu);
            let covering_factor = match kind {
                CorollaryKind::NuCompact => {
                    let support = need(&params.support_nu, "support_nu")?;
                    let r_nu = support_radius().expect("support present");
                    let scale = epsilon / (r_mu + r_nu).powf(p - 1.0);
                    (cover_count(&support, scale) as f64).sqrt()
                }
                CorollaryKind::Semidiscrete => (need(&params.atoms, "atoms")? as f64).sqrt(),
                _ => {
                    let d_nu = need(&params.manifold_dim, "manifold_dim")?;
                    let c_nu = need(&params.manifold_constant, "manifold_constant")?;
                    let r_nu = need(&params.r_nu, "r_nu")?;
                    c_nu.sqrt() * ((r_mu + r_nu).powf(p - 1.0) / epsilon).powf(d_nu / 2.0)
                }
            };
            Ok(CorollaryBound {
                kind,
                leading,
                covering_factor,
                total: leading + pre * (epsilon + r_mu.powf(p)) * covering_factor,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FluctuationTerms {
    pub var_f: f64,
    pub var_g: f64,
    /// `‖p‖_{L²(μ⊗ν)}`.
    pub density_norm: f64,
    /// `√(Var f / n_r) + √(Var g / n_s) + ε ‖p‖ / √(n_r n_s)`.
    pub value: f64,
}

/// Leading terms of the conditional fluctuation estimate for `n_r`, `n_s`
/// samples in the balls, from the population solution on the truncated
/// marginals. Diagnostic only; the potential-error term is omitted.
pub fn fluctuation_diagnostic(sol: &EotSolution, n_r: usize, n_s: usize) -> FluctuationTerms {
    let var = |v: &[f64], w: &[f64]| {
        let mean: f64 = v.iter().zip(w).map(|(x, a)| x * a).sum();
        v.iter().zip(w).map(|(x, a)| a * (x - mean) * (x - mean)).sum::<f64>()
    };
    let var_f = var(&sol.f, sol.mu_weights());
    let var_g = var(&sol.g, sol.nu_weights());
    let density_norm = density_l2_squared(sol).sqrt();
    let (nr, ns) = (n_r as f64, n_s as f64);
    FluctuationTerms {
        var_f,
        var_g,
        density_norm,
        value: (var_f / nr).sqrt() + (var_g / ns).sqrt() + sol.epsilon * density_norm / (nr * ns).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample, SamplerSpec};

    fn custom(c: f64, alpha: f64) -> TailProfile {
        TailProfile::custom(c, alpha).unwrap()
    }

    fn inputs(n: u64) -> BoundInputs {
        BoundInputs::new(custom(0.5, 2.0), custom(1.0, 1.0), &CostSpec::power(2.0).unwrap(), 1.0, n)
    }

    #[test]
    fn single_atoms_give_unit_counts() {
        let o = PointCloud::from_rows(&[[0.0, 0.0]]).unwrap();
        let inp = inputs(100);
        let b = theorem1_bound(&inp, &o, &o).unwrap();
        assert_eq!(b.covering_counts, (1, 1));
        let root = 10.0;
        let moment = (1.0 + 0.5f64.powf(-1.0) + 1.0) / root;
        let covering = (1.0 + (b.r_mu + b.r_nu).powi(2)) / root;
        assert!((b.moment_term - moment).abs() < 1e-15 * moment);
        assert!((b.covering_term - covering).abs() < 1e-13 * covering);
        assert_eq!(b.total, b.moment_term + b.covering_term);
    }

    #[test]
    fn moment_term_scales_as_inverse_root() {
        for n in [4u64, 5, 100, 1 << 12, 1 << 20] {
            let a = inputs(n).moment_term() * (n as f64).sqrt();
            let b = inputs(2 * n).moment_term() * ((2 * n) as f64).sqrt();
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a, "n={n}");
        }
    }

    #[test]
    fn gaussian_support_matches_direct_recomputation() {
        let spec = SamplerSpec::gaussian(2, 1.0).unwrap();
        let support = sample(&spec, 64, 5).unwrap();
        let profile = spec.profile.clone();
        let inp = BoundInputs::new(profile.clone(), profile.clone(), &CostSpec::power(2.0).unwrap(), 1.0, 1024);
        let b = theorem1_bound(&inp, &support, &support).unwrap();

        // independent arithmetic: radius, scale and both terms by hand
        let (c, ln) = (profile.c, 1024f64.ln());
        let r = (4.0 * 2.0 / c * (1.0 / c).max(1.0) * 1.0 * ln).sqrt();
        let scale = 1.0 / (2.0 * r);
        let kept: Vec<Vec<f64>> = support.to_rows().into_iter().filter(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt() < r).collect();
        let count = cover_count(&PointCloud::from_rows(&kept).unwrap(), scale);
        let moment = (1.0 + 2.0 / c) / 32.0;
        let covering = (1.0 + 4.0 * r * r) * (count as f64).sqrt() / 32.0;
        let want = moment + covering;
        assert!((b.total - want).abs() <= 1e-9 * want, "{} vs {want}", b.total);
        assert_eq!(b.covering_counts, (count, count));
    }

    #[test]
    fn total_nonincreasing_once_logarithm_dominates() {
        // (ε + K log(n)^{p/α}) / √n decreases once log n ≥ 2p/α
        let o = PointCloud::from_rows(&[[0.0]]).unwrap();
        for (p, alpha) in [(2.0, 2.0), (3.0, 2.0), (2.0, 1.0)] {
            let cost = CostSpec::power(p).unwrap();
            let start = (2.0 * p / alpha).exp().ceil() as u64;
            let mut prev = f64::INFINITY;
            for n in start.max(4)..=20_000 {
                let inp = BoundInputs::new(custom(1.0, alpha), custom(1.0, alpha), &cost, 1.0, n);
                let t = theorem1_bound(&inp, &o, &o).unwrap().total;
                assert!(t <= prev, "p={p} α={alpha} n={n}");
                prev = t;
            }
        }
    }

    #[test]
    fn total_can_rise_at_small_n() {
        let o = PointCloud::from_rows(&[[0.0]]).unwrap();
        let cost = CostSpec::power(2.0).unwrap();
        let at = |n| theorem1_bound(&BoundInputs::new(custom(1.0, 2.0), custom(1.0, 2.0), &cost, 1.0, n), &o, &o).unwrap().total;
        assert!(at(8) > at(4));
    }

    #[test]
    fn corollary_missing_params() {
        let base = CorollaryParams::new(100, 1.0, 2.0);
        assert!(matches!(
            corollary_bound(CorollaryKind::Subgaussian, &base),
            Err(BoundError::MissingParam("sigma"))
        ));
        assert!(matches!(
            corollary_bound(CorollaryKind::Semidiscrete, &base),
            Err(BoundError::MissingParam("profile_mu"))
        ));
        let mut p = base.clone();
        p.profile_mu = Some(custom(1.0, 2.0));
        p.r_nu = Some(1.0);
        assert!(matches!(
            corollary_bound(CorollaryKind::Semidiscrete, &p),
            Err(BoundError::MissingParam("atoms"))
        ));
    }

    #[test]
    fn semidiscrete_single_atom() {
        let mut p = CorollaryParams::new(64, 0.5, 2.0);
        p.profile_mu = Some(custom(1.0, 2.0));
        p.atoms = Some(1);
        p.moment_nu = Some(0.0);
        let b = corollary_bound(CorollaryKind::Semidiscrete, &p).unwrap();
        assert_eq!(b.covering_factor, 1.0);
        let r = truncation_radius(&custom(1.0, 2.0), 2.0, 64);
        let want = (1.0 + 1.0) / 8.0 + (0.5 + r * r) / 8.0;
        assert!((b.total - want).abs() < 1e-14);
    }

    #[test]
    fn subgaussian_p2_exponent_arithmetic() {
        let mut p = CorollaryParams::new(1000, 10.0, 2.0);
        p.sigma = Some(1.0);
        p.dim = Some(1);
        let b = corollary_bound(CorollaryKind::SubgaussianP2, &p).unwrap();
        let base = 10.0 + 1000f64.ln() / 10.0;
        assert!((b.total - base * base.sqrt() / 1000f64.sqrt()).abs() < 1e-13);
        p.p = 3.0;
        assert!(corollary_bound(CorollaryKind::SubgaussianP2, &p).is_err());
    }

    #[test]
    fn manifold_factor_scales_with_epsilon() {
        let mut p = CorollaryParams::new(256, 0.4, 2.0);
        p.profile_mu = Some(custom(1.0, 2.0));
        p.manifold_dim = Some(1.0);
        p.manifold_constant = Some(1.0);
        p.r_nu = Some(1.0);
        let a = corollary_bound(CorollaryKind::Manifold, &p).unwrap().covering_factor;
        p.epsilon = 0.2;
        let b = corollary_bound(CorollaryKind::Manifold, &p).unwrap().covering_factor;
        assert!((b / a - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn subgaussian_with_and_without_supports() {
        let mut p = CorollaryParams::new(512, 1.0, 2.0);
        p.sigma = Some(1.0);
        p.dim = Some(2);
        let full = corollary_bound(CorollaryKind::Subgaussian, &p).unwrap();
        let spec = SamplerSpec::gaussian(2, 1.0).unwrap();
        p.support_mu = Some(sample(&spec, 200, 1).unwrap());
        p.support_nu = Some(sample(&spec, 200, 2).unwrap());
        let sampled = corollary_bound(CorollaryKind::Subgaussian, &p).unwrap();
        assert!(sampled.covering_factor <= full.covering_factor);
        assert!(sampled.covering_factor >= 1.0);
    }

    #[test]
    fn nu_compact_uses_support_radius() {
        let mut p = CorollaryParams::new(128, 1.0, 2.0);
        p.profile_mu = Some(custom(1.0, 1.0));
        p.support_nu = Some(PointCloud::from_rows(&[[0.0, 0.5], [0.5, 0.0], [-0.5, 0.0]]).unwrap());
        let b = corollary_bound(CorollaryKind::NuCompact, &p).unwrap();
        assert!(b.covering_factor >= 1.0 && b.covering_factor <= 3f64.sqrt());
        let r = truncation_radius(&custom(1.0, 1.0), 2.0, 128);
        let lead = (1.0 + 1.0 + 0.25) / 128f64.sqrt();
        assert!((b.leading - lead).abs() < 1e-14);
        assert!((b.total - lead - (1.0 + r * r) * b.covering_factor / 128f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn inputs_round_trip_json() {
        let inp = inputs(64);
        let text = serde_json::to_string(&inp).unwrap();
        assert!(text.contains("\"C_p\""));
        let back: BoundInputs = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inp);
        assert!(inputs(3).validate().is_err());
    }
}

//! Truncation radii, moment envelopes and the binomial sums that control the
//! number of samples falling inside a ball.

use serde::Serialize;

use super::gamma::{gamma, incomplete_gamma, ln_gamma};
use super::BoundError;
use crate::measures::TailProfile;

/// `r_n = [4p c^{−1} (c^{−1} ∨ 1) (p/α ∨ 1)² log n]^{1/α}`.
///
/// By construction `c r_n^α ≥ 4p log n`. Panics for `n < 4`.
pub fn truncation_radius(profile: &TailProfile, p: f64, n: u64) -> f64 {
    assert!(n >= 4, "truncation radius needs n ≥ 4, got {n}");
    let (c, alpha) = (profile.c, profile.alpha);
    let inv = 1.0 / c;
    let ratio = (p / alpha).max(1.0);
    (4.0 * p * inv * inv.max(1.0) * ratio * ratio * (n as f64).ln()).powf(1.0 / alpha)
}

/// Envelope on `p`-th moments implied by the tail profile.
///
/// With `r = 0` this is `(2p/α) c^{−p/α} Γ(p/α) ≥ M_p^p`; for `r > 0` it bounds
/// `∫_{B_r^c} |x|^p` by `2 r^p e^{−c r^α} + (2p/α) c^{−p/α} Γ(p/α, c r^α)`.
pub fn moment_bound(profile: &TailProfile, p: f64, r: f64) -> f64 {
    let (c, alpha) = (profile.c, profile.alpha);
    let s = p / alpha;
    let scale = 2.0 * s * c.powf(-s);
    if r <= 0.0 {
        return scale * gamma(s);
    }
    let z = c * r.powf(alpha);
    2.0 * r.powf(p) * (-z).exp() + scale * incomplete_gamma(s, z)
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationChoiceReport {
    pub radius: f64,
    /// Envelope value `2 e^{−c r^α}` at the radius.
    pub tail: f64,
    /// `2 / n^p`.
    pub tail_target: f64,
    /// [`moment_bound`] at the radius.
    pub tail_moment: f64,
    /// `2 n^{−p/2} (1 + (p/α) c^{−p/α})`.
    pub tail_moment_target: f64,
    pub passed: bool,
}

/// Evaluates both truncation targets at `r_n`: tail mass at most `2/n^p` and
/// tail moment at most `2 n^{−p/2}(1 + (p/α) c^{−p/α})`.
pub fn truncation_choice_check(profile: &TailProfile, p: f64, n: u64) -> TruncationChoiceReport {
    let radius = truncation_radius(profile, p, n);
    let nf = n as f64;
    let tail = 2.0 * (-profile.c * radius.powf(profile.alpha)).exp();
    let tail_target = 2.0 * nf.powf(-p);
    let tail_moment = moment_bound(profile, p, radius);
    let s = p / profile.alpha;
    let tail_moment_target = 2.0 * nf.powf(-p / 2.0) * (1.0 + s * profile.c.powf(-s));
    TruncationChoiceReport {
        radius,
        tail,
        tail_target,
        tail_moment,
        tail_moment_target,
        passed: tail <= tail_target && tail_moment <= tail_moment_target,
    }
}

/// `1 / (1 − 2√2/3)`.
pub fn binomial_constant_half() -> f64 {
    1.0 / (1.0 - 2.0 * 2f64.sqrt() / 3.0)
}

/// `1 / (1 − 2·2^{1/4}/3)`.
pub fn binomial_constant_quarter() -> f64 {
    1.0 / (1.0 - 2.0 * 2f64.powf(0.25) / 3.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct BinomialReport {
    pub n: u64,
    pub a: f64,
    /// `Σ_{j≥1} j^{−1/2} binom(n,j) a^j (1−a)^{n−j}`.
    pub sum_half: f64,
    /// `Σ_{j≥1} j^{−1/4} binom(n,j) a^j (1−a)^{n−j}`.
    pub sum_quarter: f64,
    pub scaled_half: f64,
    pub scaled_quarter: f64,
    pub constant_half: f64,
    pub constant_quarter: f64,
    pub passed: bool,
}

/// Evaluates both binomial sums in log space and checks `sum·√n` and
/// `sum·n^{1/4}` against the explicit geometric-series constants.
pub fn binomial_sum_check(n: u64, a: f64) -> Result<BinomialReport, BoundError> {
    if n < 4 {
        return Err(BoundError::InvalidInput(format!("n = {n} must be at least 4")));
    }
    let nf = n as f64;
    let threshold = 1.0 - 2.0 / (nf * nf);
    if !(a >= threshold && a <= 1.0) {
        return Err(BoundError::DomainViolation {
            check: "binomial sum",
            value: a,
            threshold,
        });
    }
    let (sum_half, sum_quarter) = binomial_sums(n, a);
    let constant_half = binomial_constant_half();
    let constant_quarter = binomial_constant_quarter();
    let scaled_half = sum_half * nf.sqrt();
    let scaled_quarter = sum_quarter * nf.powf(0.25);
    Ok(BinomialReport {
        n,
        a,
        sum_half,
        sum_quarter,
        scaled_half,
        scaled_quarter,
        constant_half,
        constant_quarter,
        passed: scaled_half <= constant_half && scaled_quarter <= constant_quarter,
    })
}

fn binomial_sums(n: u64, a: f64) -> (f64, f64) {
    let nf = n as f64;
    if a == 1.0 {
        return (nf.powf(-0.5), nf.powf(-0.25));
    }
    let (ln_a, ln_b) = (a.ln(), (1.0 - a).ln());
    let ln_n_fact = ln_gamma(nf + 1.0);
    let (mut half, mut quarter) = (0.0, 0.0);
    for j in 1..=n {
        let jf = j as f64;
        let ln_binom = ln_n_fact - ln_gamma(jf + 1.0) - ln_gamma(nf - jf + 1.0);
        let mass = (ln_binom + jf * ln_a + (nf - jf) * ln_b).exp();
        half += mass / jf.sqrt();
        quarter += mass / jf.powf(0.25);
    }
    (half, quarter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Family, TailProfile};

    fn profile(c: f64, alpha: f64) -> TailProfile {
        TailProfile::new(c, alpha, Family::Custom).unwrap()
    }

    #[test]
    fn radius_closed_forms() {
        for n in [4u64, 10, 1000, 1 << 20] {
            let ln = (n as f64).ln();
            let r1 = truncation_radius(&profile(1.0, 1.0), 2.0, n);
            assert!((r1 - 32.0 * ln).abs() <= 1e-12 * r1);
            let r2 = truncation_radius(&profile(1.0, 2.0), 2.0, n);
            assert!((r2 - (8.0 * ln).sqrt()).abs() <= 1e-12 * r2);
        }
    }

    #[test]
    fn radius_satisfies_log_condition() {
        for &c in &[0.01, 0.3, 1.0, 5.0] {
            for &alpha in &[1.0, 1.5, 2.0, 3.0] {
                for &p in &[2.0, 3.0, 4.5] {
                    let mut prev = 0.0;
                    for n in [4u64, 5, 16, 100, 4096, 1 << 30] {
                        let r = truncation_radius(&profile(c, alpha), p, n);
                        assert!(c * r.powf(alpha) >= p * (n as f64).ln());
                        assert!(r > prev);
                        prev = r;
                    }
                }
            }
        }
    }

    #[test]
    fn moment_bound_examples() {
        let exp1 = profile(1.0, 1.0);
        assert!((moment_bound(&exp1, 1.0, 0.0) - 2.0).abs() < 1e-13);
        // 2 r e^{−r} + 2 Γ(1, r) = 2(1 + r) e^{−r}
        for &r in &[0.5f64, 3.0, 10.0] {
            let want = 2.0 * (1.0 + r) * (-r).exp();
            assert!((moment_bound(&exp1, 1.0, r) - want).abs() < 1e-13);
        }
        let mut prev = f64::INFINITY;
        for k in 1..60 {
            let v = moment_bound(&exp1, 2.0, k as f64);
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn truncation_choice_holds_on_grid() {
        for &c in &[0.2, 1.0, 3.0] {
            for &alpha in &[1.0, 2.0] {
                for &p in &[2.0, 3.0] {
                    for n in [4u64, 64, 4096] {
                        let r = truncation_choice_check(&profile(c, alpha), p, n);
                        assert!(r.passed, "c={c} α={alpha} p={p} n={n}: {r:?}");
                    }
                }
            }
        }
    }

    fn direct_sums(n: u64, a: f64) -> (f64, f64) {
        let mut binom = 1.0f64;
        let (mut h, mut q) = (0.0, 0.0);
        for j in 1..=n {
            binom *= (n - j + 1) as f64 / j as f64;
            let m = binom * a.powi(j as i32) * (1.0 - a).powi((n - j) as i32);
            h += m / (j as f64).sqrt();
            q += m / (j as f64).powf(0.25);
        }
        (h, q)
    }

    #[test]
    fn binomial_a_equal_one() {
        let r = binomial_sum_check(9, 1.0).unwrap();
        assert!((r.sum_half - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.passed);
    }

    #[test]
    fn binomial_n4_matches_direct_sum() {
        let a = 1.0 - 2.0 / 16.0;
        let r = binomial_sum_check(4, a).unwrap();
        let (h, q) = direct_sums(4, a);
        assert!((r.sum_half - h).abs() < 1e-14);
        assert!((r.sum_quarter - q).abs() < 1e-14);
        assert!(r.sum_half <= r.constant_half / 2.0);
        assert!(r.passed);
    }

    #[test]
    fn binomial_threshold_sweep() {
        for n in [4u64, 16, 64, 256] {
            let nf = n as f64;
            let a = 1.0 - 2.0 / (nf * nf);
            let r = binomial_sum_check(n, a).unwrap();
            let (h, q) = direct_sums(n, a);
            assert!((r.sum_half - h).abs() < 1e-12 * h);
            assert!((r.sum_quarter - q).abs() < 1e-12 * q);
            assert!(r.passed);
        }
        assert!(matches!(binomial_sum_check(4, 0.5), Err(BoundError::DomainViolation { .. })));
    }
}

//! Gamma and upper incomplete gamma functions, plus the two elementary
//! inequalities used when choosing truncation radii.

use serde::Serialize;

use super::BoundError;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_TERMS: usize = 100_000;
const REL_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Relative slack used by [`gamma_tail_check`].
pub const GAMMA_TAIL_SLACK: f64 = 1e-12;

/// `ln Γ(s)` for `s > 0` (Lanczos, g = 7).
pub fn ln_gamma(s: f64) -> f64 {
    if !(s > 0.0) {
        return f64::NAN;
    }
    if s < 0.5 {
        // reflection keeps the series argument away from zero
        let pi = std::f64::consts::PI;
        return (pi / (pi * s).sin()).ln() - ln_gamma(1.0 - s);
    }
    let z = s - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

pub fn gamma(s: f64) -> f64 {
    ln_gamma(s).exp()
}

/// Upper incomplete gamma `Γ(s, x) = ∫_x^∞ t^{s−1} e^{−t} dt`.
///
/// Lower series for `x < s + 1`, Lentz continued fraction otherwise. Returns NaN
/// outside `s > 0, x ≥ 0`.
pub fn incomplete_gamma(s: f64, x: f64) -> f64 {
    if !(s > 0.0) || !(x >= 0.0) {
        return f64::NAN;
    }
    if s == 1.0 {
        return (-x).exp();
    }
    if x == 0.0 {
        return gamma(s);
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < s + 1.0 {
        let full = gamma(s);
        full - lower_series(s, x)
    } else {
        upper_fraction(s, x)
    }
}

/// `γ(s, x)` by `x^s e^{−x} Σ x^k / (s (s+1) ⋯ (s+k))`.
fn lower_series(s: f64, x: f64) -> f64 {
    let mut denom = s;
    let mut term = 1.0 / s;
    let mut sum = term;
    for _ in 0..MAX_TERMS {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * REL_EPS {
            break;
        }
    }
    (s * x.ln() - x).exp() * sum
}

fn upper_fraction(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < REL_EPS {
            break;
        }
    }
    (s * x.ln() - x).exp() * h
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaTailReport {
    pub s: f64,
    pub x: f64,
    /// `(s ∨ 1) log x`.
    pub argument: f64,
    pub value: f64,
    /// `1/x`.
    pub bound: f64,
    pub passed: bool,
}

/// Checks `Γ(s, (s ∨ 1) log x) ≤ 1/x` for `x ≥ 4s² ∨ e`.
pub fn gamma_tail_check(s: f64, x: f64) -> Result<GammaTailReport, BoundError> {
    if !(s > 0.0) {
        return Err(BoundError::InvalidInput(format!("shape s = {s} must be positive")));
    }
    let threshold = (4.0 * s * s).max(std::f64::consts::E);
    if !(x >= threshold) {
        return Err(BoundError::DomainViolation {
            check: "gamma tail",
            value: x,
            threshold,
        });
    }
    let argument = s.max(1.0) * x.ln();
    let value = incomplete_gamma(s, argument);
    let bound = 1.0 / x;
    Ok(GammaTailReport {
        s,
        x,
        argument,
        value,
        bound,
        passed: value <= bound * (1.0 + GAMMA_TAIL_SLACK),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LogLinearReport {
    pub a: f64,
    pub x: f64,
    /// `a log x`.
    pub lhs: f64,
    pub passed: bool,
}

/// Checks `a log x ≤ x` for `x ≥ a²`.
pub fn log_linear_check(a: f64, x: f64) -> Result<LogLinearReport, BoundError> {
    if !(a > 0.0) {
        return Err(BoundError::InvalidInput(format!("a = {a} must be positive")));
    }
    if !(x >= a * a) {
        return Err(BoundError::DomainViolation {
            check: "log-linear",
            value: x,
            threshold: a * a,
        });
    }
    let lhs = a * x.ln();
    Ok(LogLinearReport { a, x, lhs, passed: lhs <= x })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Γ(s, x) = ∫_0^∞ (x+u)^{s−1} e^{−(x+u)} du by the exp-sinh rule
    /// u = exp(π/2 · sinh τ), trapezoid in τ.
    fn quad_upper_gamma(s: f64, x: f64) -> f64 {
        let h = 1.0 / 256.0;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut total = 0.0;
        let mut k = (-8.0 / h) as i64;
        while (k as f64) * h <= 4.0 {
            let tau = k as f64 * h;
            let ln_u = half_pi * tau.sinh();
            let u = ln_u.exp();
            let t = x + u;
            if t > 0.0 && u > 0.0 {
                total += ((s - 1.0) * t.ln() - t + ln_u + (half_pi * tau.cosh()).ln()).exp();
            }
            k += 1;
        }
        total * h
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_matches_factorials_and_half_integers() {
        let mut fact = 1.0;
        for k in 1..20 {
            assert!(rel(gamma(k as f64), fact) < 1e-13, "Γ({k})");
            fact *= k as f64;
        }
        assert!(rel(gamma(0.5), std::f64::consts::PI.sqrt()) < 1e-14);
        assert!(rel(gamma(1.5), 0.5 * std::f64::consts::PI.sqrt()) < 1e-14);
    }

    #[test]
    fn closed_forms() {
        for &x in &[0.0, 0.1, 1.0, 2.5, 10.0, 40.0] {
            assert!(rel(incomplete_gamma(1.0, x), (-x).exp()) < 1e-15);
            assert!(rel(incomplete_gamma(2.0, x), (1.0 + x) * (-x).exp()) < 1e-13, "x={x}");
            assert!(rel(incomplete_gamma(3.0, x), (2.0 + 2.0 * x + x * x) * (-x).exp()) < 1e-13);
        }
        assert!(rel(incomplete_gamma(0.5, 0.0), std::f64::consts::PI.sqrt()) < 1e-14);
    }

    #[test]
    fn half_shape_is_a_scaled_erfc() {
        // Γ(1/2, x) = √π erfc(√x); erfc(1) = 0.157299207050285130658...
        let erfc1 = 0.157_299_207_050_285_13;
        assert!(rel(incomplete_gamma(0.5, 1.0), std::f64::consts::PI.sqrt() * erfc1) < 1e-12);
        assert!((incomplete_gamma(0.5, 1.0) - 0.2788).abs() < 1e-4);
    }

    #[test]
    fn agrees_with_quadrature_on_both_branches() {
        for &s in &[0.25, 0.5, 1.5, 2.0, 3.7, 8.0] {
            for &x in &[0.0, 0.3, 1.0, s, s + 0.5, s + 2.0, 3.0 * s + 5.0] {
                let q = quad_upper_gamma(s, x);
                let v = incomplete_gamma(s, x);
                assert!(rel(v, q) < 1e-9, "s={s} x={x}: {v} vs {q}");
            }
        }
    }

    #[test]
    fn monotone_and_bounded_by_gamma() {
        for &s in &[0.25, 1.0, 2.5, 6.0] {
            let full = gamma(s);
            assert!(rel(incomplete_gamma(s, 0.0), full) < 1e-10);
            let mut prev = full;
            for k in 1..200 {
                let v = incomplete_gamma(s, k as f64 * 0.1);
                assert!(v < prev, "s={s} k={k}");
                assert!(v <= full);
                prev = v;
            }
        }
    }

    #[test]
    fn gamma_tail_domain() {
        assert!(matches!(gamma_tail_check(1.0, 2.0), Err(BoundError::DomainViolation { .. })));
        assert!(matches!(gamma_tail_check(3.0, 30.0), Err(BoundError::DomainViolation { .. })));
        let r = gamma_tail_check(0.5, std::f64::consts::E).unwrap();
        assert!(r.passed);
        assert!(r.value < 0.28 && r.bound > 0.36);
    }

    #[test]
    fn log_linear_examples() {
        assert!(log_linear_check(1.0, 1.0).unwrap().passed);
        let e = std::f64::consts::E;
        let r = log_linear_check(e, e * e).unwrap();
        assert!(r.passed && (r.lhs - 2.0 * e).abs() < 1e-12);
        assert!(log_linear_check(3.0, 8.0).is_err());
    }
}

//! Radial costs `c(x,y) = h(|x−y|)` with the local Lipschitz envelope
//! `|h(t) − h(t')| ≤ C_p (t∨t')^{p−1} |t−t'|`, `p ≥ 2`.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{distance, DiscreteMeasure};

/// Relative slack for inequality checks that hold with equality in exact arithmetic.
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("cost exponent p = {0} must be at least 2")]
    ExponentTooSmall(f64),
    #[error("envelope constant C_p = {0} must be positive")]
    NonPositiveConstant(f64),
    #[error("points have dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("custom cost profiles cannot be serialized")]
    NotSerializable,
    #[error("unknown cost kind `{0}`")]
    UnknownKind(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum CostProfile {
    /// `h(t) = t^p`.
    PowerP,
    /// Caller-supplied `h`, which must be continuous, nonnegative, `h(0) = 0`.
    Custom(Profile),
}

impl fmt::Debug for CostProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostProfile::PowerP => f.write_str("PowerP"),
            CostProfile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostSpec {
    p: f64,
    c_p: f64,
    profile: CostProfile,
}

#[derive(Serialize, Deserialize)]
struct CostRepr {
    kind: String,
    p: f64,
    #[serde(rename = "C_p")]
    c_p: f64,
}

impl CostSpec {
    /// `|x−y|^p` with the sharp envelope constant `C_p = p`.
    pub fn power(p: f64) -> Result<Self, CostError> {
        Self::power_with_constant(p, p)
    }

    pub fn power_with_constant(p: f64, c_p: f64) -> Result<Self, CostError> {
        Self::validate(p, c_p)?;
        Ok(Self { p, c_p, profile: CostProfile::PowerP })
    }

    /// A custom profile `h` with its claimed `(p, C_p)`; see [`check_envelope`].
    pub fn custom(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        p: f64,
        c_p: f64,
    ) -> Result<Self, CostError> {
        Self::validate(p, c_p)?;
        Ok(Self { p, c_p, profile: CostProfile::Custom(Arc::new(h)) })
    }

    fn validate(p: f64, c_p: f64) -> Result<(), CostError> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(CostError::ExponentTooSmall(p));
        }
        if !(c_p > 0.0 && c_p.is_finite()) {
            return Err(CostError::NonPositiveConstant(c_p));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c_p(&self) -> f64 {
        self.c_p
    }

    pub fn profile(&self) -> &CostProfile {
        &self.profile
    }

    pub fn h(&self, t: f64) -> f64 {
        match &self.profile {
            CostProfile::PowerP => {
                if self.p == 2.0 {
                    t * t
                } else {
                    t.powf(self.p)
                }
            }
            CostProfile::Custom(h) => h(t),
        }
    }

    /// `c(x,y) = h(|x−y|)`, symmetric in its arguments.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, CostError> {
        if x.len() != y.len() {
            return Err(CostError::DimensionMismatch(x.len(), y.len()));
        }
        Ok(self.h(distance(x, y)))
    }

    /// Cost matrix `C_ij = c(x_i, y_j)` between the atoms of two measures.
    pub fn matrix(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Array2<f64>, CostError> {
        if mu.dim() != nu.dim() {
            return Err(CostError::DimensionMismatch(mu.dim(), nu.dim()));
        }
        let (m, n) = (mu.len(), nu.len());
        let mut out = Array2::zeros((m, n));
        for (i, x) in mu.points().iter().enumerate() {
            for (j, y) in nu.points().iter().enumerate() {
                out[[i, j]] = self.h(distance(x, y));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, CostError> {
        match self.profile {
            CostProfile::PowerP => Ok(serde_json::to_string(&CostRepr {
                kind: "power_p".into(),
                p: self.p,
                c_p: self.c_p,
            })?),
            CostProfile::Custom(_) => Err(CostError::NotSerializable),
        }
    }

    pub fn from_json(s: &str) -> Result<Self, CostError> {
        let repr: CostRepr = serde_json::from_str(s)?;
        Self::try_from_repr(repr)
    }

    fn try_from_repr(repr: CostRepr) -> Result<Self, CostError> {
        match repr.kind.as_str() {
            "power_p" => Self::power_with_constant(repr.p, repr.c_p),
            other => Err(CostError::UnknownKind(other.to_string())),
        }
    }
}

impl Serialize for CostSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.profile {
            CostProfile::PowerP => CostRepr {
                kind: "power_p".into(),
                p: self.p,
                c_p: self.c_p,
            }
            .serialize(serializer),
            CostProfile::Custom(_) => Err(serde::ser::Error::custom(CostError::NotSerializable)),
        }
    }
}

impl<'de> Deserialize<'de> for CostSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = CostRepr::deserialize(deserializer)?;
        Self::try_from_repr(repr).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeViolation {
    pub t: f64,
    pub t_prime: f64,
    pub gap: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EnvelopeReport {
    pub checked: usize,
    pub violations: Vec<EnvelopeViolation>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `|h(t) − h(t')| ≤ C_p (t∨t')^{p−1} |t−t'|` on every grid pair.
pub fn check_envelope(spec: &CostSpec, grid: &[(f64, f64)]) -> EnvelopeReport {
    let mut report = EnvelopeReport::default();
    for &(t, t_prime) in grid {
        report.checked += 1;
        let gap = (spec.h(t) - spec.h(t_prime)).abs();
        let envelope = spec.c_p * t.max(t_prime).powf(spec.p - 1.0) * (t - t_prime).abs();
        if gap > envelope * (1.0 + REL_SLACK) {
            report.violations.push(EnvelopeViolation { t, t_prime, gap, envelope });
        }
    }
    report
}

#[derive(Debug, Clone, Default)]
pub struct PointwiseReport {
    pub checked: usize,
    /// Largest observed `c(x,y) / (C_p |x−y|^p)` over pairs with `x ≠ y`.
    pub max_ratio: f64,
    pub violations: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PointwiseReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `c(x,y) ≤ C_p |x−y|^p` at every pair.
pub fn pointwise_bound_check(
    spec: &CostSpec,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<PointwiseReport, CostError> {
    let mut report = PointwiseReport::default();
    for (x, y) in pairs {
        report.checked += 1;
        let c = spec.eval(x, y)?;
        let bound = spec.c_p * distance(x, y).powf(spec.p);
        if bound > 0.0 {
            report.max_ratio = report.max_ratio.max(c / bound);
        }
        if c.abs() > bound * (1.0 + REL_SLACK) {
            report.violations.push((x.clone(), y.clone()));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_examples() {
        let c2 = CostSpec::power(2.0).unwrap();
        assert_eq!(c2.eval(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(c2.eval(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        let c3 = CostSpec::power(3.0).unwrap();
        assert!((c3.eval(&[1.0], &[3.0]).unwrap() - 8.0).abs() < 1e-12);
        assert!(matches!(c2.eval(&[0.0], &[0.0, 1.0]), Err(CostError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn rejects_small_exponent() {
        assert!(matches!(CostSpec::power(1.5), Err(CostError::ExponentTooSmall(_))));
        assert!(matches!(
            CostSpec::power_with_constant(2.0, 0.0),
            Err(CostError::NonPositiveConstant(_))
        ));
    }

    fn grid(hi: f64, k: usize) -> Vec<(f64, f64)> {
        let pts: Vec<f64> = (1..=k).map(|i| hi * i as f64 / k as f64).collect();
        pts.iter().flat_map(|&t| pts.iter().map(move |&s| (t, s))).collect()
    }

    #[test]
    fn envelope_holds_for_sharp_constant() {
        let spec = CostSpec::power_with_constant(2.0, 2.0).unwrap();
        let report = check_envelope(&spec, &grid(10.0, 60));
        assert_eq!(report.checked, 3600);
        assert!(report.passed());
    }

    #[test]
    fn envelope_detects_small_constant() {
        let spec = CostSpec::power_with_constant(2.0, 0.5).unwrap();
        let report = check_envelope(&spec, &[(1.0, 2.0)]);
        // |1 − 4| = 3 > 0.5 · 2 · 1
        assert_eq!(report.violations.len(), 1);
        assert!(!check_envelope(&spec, &grid(10.0, 20)).passed());
    }

    #[test]
    fn equal_arguments_never_violate() {
        let spec = CostSpec::power_with_constant(3.0, 1e-9).unwrap();
        let diag: Vec<(f64, f64)> = (1..100).map(|i| (i as f64 * 0.37, i as f64 * 0.37)).collect();
        assert!(check_envelope(&spec, &diag).passed());
    }

    #[test]
    fn envelope_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in [2.0, 2.5, 3.0, 4.0] {
            let spec = CostSpec::power(p).unwrap();
            let pairs: Vec<(f64, f64)> = (0..10_000)
                .map(|_| (rng.random_range(1e-6..100.0), rng.random_range(1e-6..100.0)))
                .collect();
            assert!(check_envelope(&spec, &pairs).passed(), "p = {p}");
        }
    }

    #[test]
    fn pointwise_bound() {
        let spec = CostSpec::power_with_constant(2.0, 1.0).unwrap();
        let pairs = vec![
            (vec![0.0, 0.0], vec![0.0, 0.0]),
            (vec![1.0, 0.0], vec![0.0, 3.0]),
            (vec![-2.0, 1.0], vec![0.5, 0.5]),
        ];
        let report = pointwise_bound_check(&spec, &pairs).unwrap();
        assert!(report.passed());
        assert!((report.max_ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pointwise_bound_custom_profile() {
        // h(t) = t² + 0·sin²(t)
        let spec = CostSpec::custom(|t| t * t + 0.0 * t.sin().powi(2), 2.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pairs: Vec<_> = (0..500)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
                (x, y)
            })
            .collect();
        assert!(pointwise_bound_check(&spec, &pairs).unwrap().passed());
        assert!(check_envelope(&spec, &grid(20.0, 40)).passed());
    }

    #[test]
    fn json_shape() {
        let spec = CostSpec::power(3.0).unwrap();
        let text = spec.to_json().unwrap();
        assert_eq!(text, r#"{"kind":"power_p","p":3.0,"C_p":3.0}"#);
        let back = CostSpec::from_json(&text).unwrap();
        assert_eq!((back.p(), back.c_p()), (3.0, 3.0));
        let custom = CostSpec::custom(|t| t * t, 2.0, 2.0).unwrap();
        assert!(matches!(custom.to_json(), Err(CostError::NotSerializable)));
        assert!(CostSpec::from_json(r#"{"kind":"huber","p":2,"C_p":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_homogeneous(
            x in proptest::collection::vec(-10.0f64..10.0, 3),
            y in proptest::collection::vec(-10.0f64..10.0, 3),
            lambda in 0.1f64..10.0,
            p in 2.0f64..5.0,
        ) {
            let spec = CostSpec::power(p).unwrap();
            let c = spec.eval(&x, &y).unwrap();
            prop_assert_eq!(c, spec.eval(&y, &x).unwrap());
            let lx: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            let ly: Vec<f64> = y.iter().map(|v| lambda * v).collect();
            let scaled = spec.eval(&lx, &ly).unwrap();
            prop_assert!((scaled - lambda.powf(p) * c).abs() <= 1e-10 * scaled.abs().max(1e-300));
        }
    }
}

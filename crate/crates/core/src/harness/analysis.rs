use serde::{Deserialize, Serialize};

use super::run::ExperimentResult;
use super::HarnessError;
use crate::bounds::{theorem1_bound, BoundInputs};
use crate::measures::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log y` on `log n`.
pub fn fit_log_log(ns: &[usize], ys: &[f64]) -> Result<RateFit, HarnessError> {
    if ns.len() != ys.len() {
        return Err(HarnessError::DegenerateFit(format!("{} abscissae for {} values", ns.len(), ys.len())));
    }
    if ns.len() < 3 {
        return Err(HarnessError::DegenerateFit(format!("need 3 grid points, got {}", ns.len())));
    }
    if let Some(&y) = ys.iter().find(|y| !(**y > 0.0 && y.is_finite())) {
        return Err(HarnessError::DegenerateFit(format!("mean error {y} is not positive")));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ls.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ls.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateFit("all grid points coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = xs.iter().zip(&ls).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - residual / syy };
    Ok(RateFit { slope, intercept, r_squared })
}

/// Fits the summary means; every mean must be positive.
pub fn fit_rate(result: &ExperimentResult) -> Result<RateFit, HarnessError> {
    let ns: Vec<usize> = result.summary.iter().map(|r| r.n).collect();
    let ys: Vec<f64> = result.summary.iter().map(|r| r.mean_error).collect();
    fit_log_log(&ns, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub n: usize,
    pub mean_error: f64,
    /// Bound at the input `c_global`.
    pub bound_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub rows: Vec<BoundPair>,
    /// Smallest multiplier for which the bound dominates every mean.
    pub min_c_global: f64,
    /// `max / min` of `mean_error / bound_value` over positive means. Since
    /// `bound·√n` is the bound's polylog factor, this is the drift of
    /// `mean·√n / polylog(n)`.
    pub ratio_drift: f64,
    /// `max / min` of `mean_error·√n` over positive means.
    pub root_n_drift: f64,
    /// `max_n mean·√n ≤ 4 · min_c_global · bound₁(n_max) · √n_max`, with
    /// `bound₁` the bound at `c_global = 1`.
    pub shape_ok: bool,
}

fn drift(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

/// Recomputes the bound at every grid `n` and compares it with the means.
/// Rows whose mean is NaN (all cells failed) are skipped.
pub fn compare_to_bound(
    result: &ExperimentResult,
    inputs: &BoundInputs,
    support_mu: &PointCloud,
    support_nu: &PointCloud,
) -> Result<BoundComparison, HarnessError> {
    let mut unit = Vec::new();
    let mut rows = Vec::new();
    for row in result.summary.iter().filter(|r| !r.mean_error.is_nan()) {
        let at = BoundInputs { n: row.n as u64, c_global: 1.0, ..inputs.clone() };
        let b1 = theorem1_bound(&at, support_mu, support_nu)?.total;
        unit.push(b1);
        rows.push(BoundPair {
            n: row.n,
            mean_error: row.mean_error,
            bound_value: inputs.c_global * b1,
        });
    }
    let min_c_global = rows
        .iter()
        .zip(&unit)
        .map(|(r, b1)| r.mean_error / b1)
        .fold(0.0f64, f64::max);
    let ratio_drift = drift(rows.iter().zip(&unit).map(|(r, b1)| r.mean_error / b1));
    let scaled = |r: &BoundPair| r.mean_error * (r.n as f64).sqrt();
    let root_n_drift = drift(rows.iter().map(scaled));
    let shape_ok = match (rows.last(), unit.last()) {
        (Some(last), Some(b1)) => {
            let ceiling = 4.0 * min_c_global * b1 * (last.n as f64).sqrt();
            rows.iter().map(scaled).all(|v| v <= ceiling * (1.0 + 1e-12))
        }
        _ => true,
    };
    Ok(BoundComparison {
        rows,
        min_c_global,
        ratio_drift,
        root_n_drift,
        shape_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let ns = [64, 128, 256, 512, 1024, 2048];
        let half: Vec<f64> = ns.iter().map(|&n| 3.0 / (n as f64).sqrt()).collect();
        let fit = fit_log_log(&ns, &half).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let inv: Vec<f64> = ns.iter().map(|&n| 0.7 / n as f64).collect();
        assert!((fit_log_log(&ns, &inv).unwrap().slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(fit_log_log(&[4, 8, 16], &[1.0, 0.0, 1.0]), Err(HarnessError::DegenerateFit(_))));
        assert!(matches!(fit_log_log(&[4, 8], &[1.0, 0.5]), Err(HarnessError::DegenerateFit(_))));
    }

    #[test]
    fn r_squared_of_noisy_line() {
        // residuals ±0.1 in log space around slope −1/2
        let ns = [16, 64, 256, 1024];
        let ys: Vec<f64> = ns
            .iter()
            .enumerate()
            .map(|(i, &n)| (n as f64).powf(-0.5) * if i % 2 == 0 { 0.1f64.exp() } else { (-0.1f64).exp() })
            .collect();
        let fit = fit_log_log(&ns, &ys).unwrap();
        assert!(fit.r_squared < 1.0 && fit.r_squared > 0.95);
    }
}

//! Discrete entropic optimal transport
//!
//! `C_ε(μ,ν) = min_{π ∈ Π(μ,ν)} ∫ c dπ + ε H(π | μ⊗ν)`
//!
//! solved with log-domain Sinkhorn iterations on the Schrödinger potentials
//! `(f, g)`. The optimal plan is `π_ij = μ_i ν_j exp((f_i + g_j − c_ij)/ε)`.
//! Sinkhorn determines `f + g` only; after convergence the potentials are
//! shifted so that `∫ f dμ = ∫ g dν = C_ε / 2` (up to the duality gap).
//! When Sinkhorn stalls (nearly deterministic plans at small ε contract very
//! slowly) the potentials are refined by Newton steps on the dual.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{CostError, CostSpec};
use crate::decimal::fmt_f64;
use crate::measures::{distance, norm, DiscreteMeasure};

/// Plan entries below this are treated as exact zeros in the primal objective.
pub const PLAN_FLOOR: f64 = 1e-300;

/// ε-scaling kicks in when `ε < WARM_START_RATIO · median(c)`.
pub const WARM_START_RATIO: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EotError {
    #[error("Sinkhorn did not reach tolerance after {iterations} iterations (residual {residual:e})")]
    MaxIterationsExceeded {
        iterations: usize,
        residual: f64,
        last: Box<EotSolution>,
    },
    #[error("cost entry ({i}, {j}) = {value} is not representable at ε = {epsilon}")]
    NonFiniteKernel {
        i: usize,
        j: usize,
        value: f64,
        epsilon: f64,
    },
    #[error("plan has mass {mass:e} at ({i}, {j}) where μ⊗ν has none")]
    AbsoluteContinuityViolation { i: usize, j: usize, mass: f64 },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("support of the {which} marginal leaves the ball of radius {radius}")]
    SupportOutsideBall { which: &'static str, radius: f64 },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Bound on the L1 marginal violation of the returned plan.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            epsilon: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self { epsilon, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EotError> {
        if !(self.tolerance > 0.0) {
            return Err(EotError::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(EotError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(EotError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EotSolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub plan: Array2<f64>,
    /// `∫ c dπ + ε H(π | μ⊗ν)` of the returned plan.
    pub value: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// Largest L1 marginal violation of `plan`.
    pub residual: f64,
    cost: Array2<f64>,
    mu_weights: Vec<f64>,
    nu_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct SolutionSummary {
    pub epsilon: f64,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl Serialize for EotSolution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SolutionSummary {
            epsilon: self.epsilon,
            value: self.value,
            iterations: self.iterations,
            residual: self.residual,
            f: self.f.clone(),
            g: self.g.clone(),
        }
        .serialize(serializer)
    }
}

impl EotSolution {
    pub fn cost_matrix(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn mu_weights(&self) -> &[f64] {
        &self.mu_weights
    }

    pub fn nu_weights(&self) -> &[f64] {
        &self.nu_weights
    }

    pub fn to_json(&self) -> Result<String, EotError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sparse `(i, j, mass)` triplets with `mass > 1e-15`.
    pub fn write_plan_csv<W: Write>(&self, mut writer: W) -> Result<(), EotError> {
        writeln!(writer, "i,j,mass")?;
        for ((i, j), &mass) in self.plan.indexed_iter() {
            if mass > 1e-15 {
                writeln!(writer, "{i},{j},{}", fmt_f64(mass))?;
            }
        }
        Ok(())
    }
}

/// Solves `C_ε(μ,ν)` for the cost `c`.
pub fn solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SolverConfig,
) -> Result<EotSolution, EotError> {
    let c = cost.matrix(mu, nu)?;
    solve_matrix(mu.weights(), nu.weights(), c, cfg)
}

/// Solves the problem for an explicit cost matrix `c[i][j]`.
pub fn solve_matrix(
    a: &[f64],
    b: &[f64],
    cost: Array2<f64>,
    cfg: &SolverConfig,
) -> Result<EotSolution, EotError> {
    cfg.validate()?;
    let (m, n) = cost.dim();
    if m != a.len() || n != b.len() {
        return Err(EotError::ShapeMismatch {
            expected: (a.len(), b.len()),
            found: (m, n),
        });
    }
    let eps = cfg.epsilon;
    for ((i, j), &value) in cost.indexed_iter() {
        if !value.is_finite() || !(value / eps).is_finite() {
            return Err(EotError::NonFiniteKernel { i, j, value, epsilon: eps });
        }
    }

    let mut state = Sinkhorn::new(a, b, &cost);
    let mut iterations = 0;
    for stage_eps in epsilon_schedule(&cost, eps) {
        let last_stage = stage_eps == eps;
        let mut polishes = 0;
        loop {
            let (outcome, used) = state.run(stage_eps, cfg.tolerance, cfg.max_iterations - iterations);
            iterations += used;
            match outcome {
                RunOutcome::Converged => break,
                // warm-up stages only need to be roughly right
                RunOutcome::Stalled if !last_stage => break,
                RunOutcome::Stalled if polishes < MAX_POLISHES && iterations < cfg.max_iterations => {
                    polishes += 1;
                    iterations += state.newton_polish(stage_eps, cfg.tolerance, cfg.max_iterations - iterations);
                }
                RunOutcome::Stalled => continue,
                RunOutcome::Exhausted if !last_stage && iterations < cfg.max_iterations => break,
                // the budget is spent
                RunOutcome::Exhausted => {}
            }
            if iterations >= cfg.max_iterations {
                let residual = state.row_residual;
                let last = finish(&state, a, b, cost, eps, iterations);
                return Err(EotError::MaxIterationsExceeded {
                    iterations,
                    residual,
                    last: Box::new(last),
                });
            }
        }
    }
    Ok(finish(&state, a, b, cost, eps, iterations))
}

/// Geometric ε decrease from the median cost down to the target, or just the
/// target when it is not small compared with the costs.
fn epsilon_schedule(cost: &Array2<f64>, eps: f64) -> Vec<f64> {
    let mut values: Vec<f64> = cost.iter().copied().collect();
    let mid = values.len() / 2;
    let (_, median, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    let mut schedule = Vec::new();
    if eps < WARM_START_RATIO * median {
        let mut e = median;
        while e > 2.0 * eps {
            schedule.push(e);
            e *= 0.5;
        }
    }
    schedule.push(eps);
    schedule
}

struct Sinkhorn {
    m: usize,
    n: usize,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    a: Vec<f64>,
    /// Row-major copy of `c` and its transpose.
    c: Vec<f64>,
    ct: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    row_residual: f64,
    buf: Vec<f64>,
}

fn ln_weight(w: f64) -> f64 {
    if w > 0.0 {
        w.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `−ε log Σ_k exp(log_w_k + (pot_k − c_k)/ε)`.
fn soft_min(log_w: &[f64], pot: &[f64], c_row: &[f64], eps: f64, buf: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (((out, &lw), &p), &c) in buf.iter_mut().zip(log_w).zip(pot).zip(c_row) {
        let v = lw + (p - c) / eps;
        *out = v;
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = buf.iter().map(|&v| (v - max).exp()).sum();
    -eps * (max + sum.ln())
}

impl Sinkhorn {
    fn new(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Self {
        let (m, n) = cost.dim();
        let c: Vec<f64> = cost.iter().copied().collect();
        let mut ct = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                ct[j * m + i] = c[i * n + j];
            }
        }
        Self {
            m,
            n,
            log_a: a.iter().map(|&w| ln_weight(w)).collect(),
            log_b: b.iter().map(|&w| ln_weight(w)).collect(),
            a: a.to_vec(),
            c,
            ct,
            f: vec![0.0; m],
            g: vec![0.0; n],
            row_residual: f64::INFINITY,
            buf: vec![0.0; m.max(n)],
        }
    }

    fn update_f(&mut self, eps: f64, out: &mut [f64]) {
        let n = self.n;
        for (i, fi) in out.iter_mut().enumerate() {
            *fi = soft_min(&self.log_b, &self.g, &self.c[i * n..(i + 1) * n], eps, &mut self.buf[..n]);
        }
    }

    fn update_g(&mut self, eps: f64) {
        let m = self.m;
        for j in 0..self.n {
            self.g[j] = soft_min(&self.log_a, &self.f, &self.ct[j * m..(j + 1) * m], eps, &mut self.buf[..m]);
        }
    }

    /// Alternating updates until the row marginals of `(f, g)` are within
    /// `tol` in L1 (columns are exact after each `g` update), the budget runs
    /// out, or the residual stops shrinking. Returns the iterations used.
    fn run(&mut self, eps: f64, tol: f64, budget: usize) -> (RunOutcome, usize) {
        let mut f_new = vec![0.0; self.m];
        self.update_f(eps, &mut f_new);
        self.f.copy_from_slice(&f_new);
        let mut used = 0;
        let mut checkpoint = f64::INFINITY;
        while used < budget {
            self.update_g(eps);
            self.update_f(eps, &mut f_new);
            used += 1;
            self.row_residual = self
                .a
                .iter()
                .zip(&self.f)
                .zip(&f_new)
                .map(|((&ai, &fo), &fn_)| ai * (((fo - fn_) / eps).exp() - 1.0).abs())
                .sum();
            if self.row_residual <= tol {
                return (RunOutcome::Converged, used);
            }
            self.f.copy_from_slice(&f_new);
            if used % STALL_WINDOW == 0 {
                if self.row_residual > STALL_RATIO * checkpoint {
                    return (RunOutcome::Stalled, used);
                }
                checkpoint = self.row_residual;
            }
        }
        (RunOutcome::Exhausted, used)
    }

    fn plan_into(&self, eps: f64, out: &mut [f64]) {
        let n = self.n;
        for i in 0..self.m {
            for j in 0..n {
                let v = self.log_a[i] + self.log_b[j] + (self.f[i] + self.g[j] - self.c[i * n + j]) / eps;
                out[i * n + j] = if v.is_finite() { v.exp() } else { 0.0 };
            }
        }
    }

    /// Marginal defects `(a − π1, b − πᵀ1)` and their larger L1 norm.
    fn defects(&self, plan: &[f64]) -> (Vec<f64>, f64) {
        let (m, n) = (self.m, self.n);
        let mut grad = vec![0.0; m + n];
        grad[..m].copy_from_slice(&self.a);
        for j in 0..n {
            grad[m + j] = self.log_b[j].exp();
        }
        for i in 0..m {
            for j in 0..n {
                let v = plan[i * n + j];
                grad[i] -= v;
                grad[m + j] -= v;
            }
        }
        let rows: f64 = grad[..m].iter().map(|v| v.abs()).sum();
        let cols: f64 = grad[m..].iter().map(|v| v.abs()).sum();
        (grad, rows.max(cols))
    }

    /// Newton ascent on the dual `⟨f,a⟩ + ⟨g,b⟩ − ε⟨e^{(f⊕g−c)/ε}, a⊗b⟩`.
    ///
    /// The Hessian is `−(1/ε)[[diag π1, π], [πᵀ, diag πᵀ1]]`; each step solves
    /// with it by Jacobi-preconditioned conjugate gradients and backtracks on the
    /// marginal defect. Returns the steps taken.
    fn newton_polish(&mut self, eps: f64, tol: f64, budget: usize) -> usize {
        let (m, n) = (self.m, self.n);
        let mut plan = vec![0.0; m * n];
        self.plan_into(eps, &mut plan);
        let (mut grad, mut defect) = self.defects(&plan);
        let mut steps = 0;
        while steps < budget.min(MAX_NEWTON_STEPS) && defect > 0.1 * tol {
            steps += 1;
            let Some(dir) = newton_direction(&plan, &grad, m, n) else {
                break;
            };
            let (f0, g0) = (self.f.clone(), self.g.clone());
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                for i in 0..m {
                    self.f[i] = f0[i] + t * eps * dir[i];
                }
                for j in 0..n {
                    self.g[j] = g0[j] + t * eps * dir[m + j];
                }
                self.plan_into(eps, &mut plan);
                let (g_new, d_new) = self.defects(&plan);
                if d_new < defect {
                    grad = g_new;
                    defect = d_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                self.f = f0;
                self.g = g0;
                break;
            }
        }
        steps
    }
}

/// Solves `[[diag r, π], [πᵀ, diag s]] x = grad`. The matrix is singular along
/// `(1, −1)`, which `grad` is orthogonal to, so conjugate gradients stay in
/// its range.
fn newton_direction(plan: &[f64], grad: &[f64], m: usize, n: usize) -> Option<Vec<f64>> {
    let mut diag = vec![0.0; m + n];
    for i in 0..m {
        for j in 0..n {
            diag[i] += plan[i * n + j];
            diag[m + j] += plan[i * n + j];
        }
    }
    if diag.iter().any(|&d| !(d > 0.0)) {
        return None;
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        for k in 0..m + n {
            out[k] = diag[k] * v[k];
        }
        for i in 0..m {
            for j in 0..n {
                let p = plan[i * n + j];
                out[i] += p * v[m + j];
                out[m + j] += p * v[i];
            }
        }
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; m + n];
    let mut r = grad.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m + n];
    let mut rz = dot(&r, &z);
    let target = 1e-14 * dot(grad, grad).sqrt();
    for _ in 0..(10 * (m + n) + 50).min(MAX_CG_ITERATIONS) {
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            break;
        }
        let alpha = rz / curvature;
        for k in 0..m + n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= target {
            break;
        }
        for k in 0..m + n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m + n {
            p[k] = z[k] + beta * p[k];
        }
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

enum RunOutcome {
    Converged,
    Stalled,
    Exhausted,
}

/// Residual checkpoints are taken every this many iterations.
const STALL_WINDOW: usize = 64;
/// A window that shrinks the residual by less than this factor counts as a stall.
const STALL_RATIO: f64 = 0.9;
const MAX_POLISHES: usize = 8;
const MAX_NEWTON_STEPS: usize = 50;
const MAX_CG_ITERATIONS: usize = 5_000;

fn finish(
    state: &Sinkhorn,
    a: &[f64],
    b: &[f64],
    cost: Array2<f64>,
    eps: f64,
    iterations: usize,
) -> EotSolution {
    let (m, n) = cost.dim();
    let mut plan = Array2::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            let v = state.log_a[i] + state.log_b[j] + (state.f[i] + state.g[j] - cost[[i, j]]) / eps;
            plan[[i, j]] = if v.is_finite() { v.exp() } else { 0.0 };
        }
    }
    let residual = marginal_residual(&plan, a, b);
    let value = primal_matrix(&plan, a, b, &cost, eps).unwrap_or(f64::NAN);

    let int_f: f64 = a.iter().zip(&state.f).map(|(w, v)| w * v).sum();
    let int_g: f64 = b.iter().zip(&state.g).map(|(w, v)| w * v).sum();
    let shift = 0.5 * (int_g - int_f);
    EotSolution {
        f: state.f.iter().map(|v| v + shift).collect(),
        g: state.g.iter().map(|v| v - shift).collect(),
        plan,
        value,
        epsilon: eps,
        iterations,
        residual,
        cost,
        mu_weights: a.to_vec(),
        nu_weights: b.to_vec(),
    }
}

/// `max(Σ_i |Σ_j π_ij − a_i|, Σ_j |Σ_i π_ij − b_j|)`.
pub fn marginal_residual(plan: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
    let rows: f64 = plan
        .rows()
        .into_iter()
        .zip(a)
        .map(|(row, &ai)| (row.sum() - ai).abs())
        .sum();
    let cols: f64 = plan
        .columns()
        .into_iter()
        .zip(b)
        .map(|(col, &bj)| (col.sum() - bj).abs())
        .sum();
    rows.max(cols)
}

fn primal_matrix(
    plan: &Array2<f64>,
    a: &[f64],
    b: &[f64],
    cost: &Array2<f64>,
    eps: f64,
) -> Result<f64, EotError> {
    let expected = (a.len(), b.len());
    for shape in [plan.dim(), cost.dim()] {
        if shape != expected {
            return Err(EotError::ShapeMismatch { expected, found: shape });
        }
    }
    let mut transport = 0.0;
    let mut entropy = 0.0;
    for ((i, j), &mass) in plan.indexed_iter() {
        if mass < PLAN_FLOOR {
            continue;
        }
        if a[i] <= 0.0 || b[j] <= 0.0 {
            return Err(EotError::AbsoluteContinuityViolation { i, j, mass });
        }
        transport += mass * cost[[i, j]];
        entropy += mass * (mass.ln() - a[i].ln() - b[j].ln());
    }
    Ok(transport + eps * entropy)
}

/// `∫ c dπ + ε H(π | μ⊗ν)` with `0 log 0 = 0`.
pub fn primal_value(
    plan: &Array2<f64>,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    epsilon: f64,
) -> Result<f64, EotError> {
    let c = cost.matrix(mu, nu)?;
    primal_matrix(plan, mu.weights(), nu.weights(), &c, epsilon)
}

/// `∫ f dμ + ∫ g dν − ε ∫ (e^{(f+g−c)/ε} − 1) d(μ⊗ν)`.
pub fn dual_value(
    f: &[f64],
    g: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    epsilon: f64,
) -> Result<f64, EotError> {
    let c = cost.matrix(mu, nu)?;
    dual_matrix(f, g, mu.weights(), nu.weights(), &c, epsilon)
}

pub fn dual_matrix(
    f: &[f64],
    g: &[f64],
    a: &[f64],
    b: &[f64],
    cost: &Array2<f64>,
    epsilon: f64,
) -> Result<f64, EotError> {
    let expected = (a.len(), b.len());
    if (f.len(), g.len()) != expected || cost.dim() != expected {
        return Err(EotError::ShapeMismatch {
            expected,
            found: (f.len(), g.len()),
        });
    }
    let linear: f64 =
        a.iter().zip(f).map(|(w, v)| w * v).sum::<f64>() + b.iter().zip(g).map(|(w, v)| w * v).sum::<f64>();
    let mut penalty = 0.0;
    for ((i, j), &c) in cost.indexed_iter() {
        penalty += a[i] * b[j] * (((f[i] + g[j] - c) / epsilon).exp() - 1.0);
    }
    Ok(linear - epsilon * penalty)
}

/// Entropic density `dπ/d(μ⊗ν) = exp((f_i + g_j − c_ij)/ε)`.
pub fn density(sol: &EotSolution) -> Array2<f64> {
    let eps = sol.epsilon;
    Array2::from_shape_fn(sol.cost.dim(), |(i, j)| {
        ((sol.f[i] + sol.g[j] - sol.cost[[i, j]]) / eps).exp()
    })
}

/// `‖p‖²_{L²(μ⊗ν)} = Σ μ_i ν_j p_ij²`.
pub fn density_l2_squared(sol: &EotSolution) -> f64 {
    density(sol)
        .indexed_iter()
        .map(|((i, j), &p)| sol.mu_weights[i] * sol.nu_weights[j] * p * p)
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    /// `C_ε(μ, ν, c)`.
    pub direct: f64,
    /// `ε · C_1(μ, ν, c/ε)`.
    pub rescaled: f64,
    pub gap: f64,
    pub passed: bool,
}

/// Relative tolerance for the ε-rescaling identity.
pub const SCALING_TOL: f64 = 1e-7;

/// Compares `C_ε(μ,ν,c)` with `ε C_1(μ,ν,c/ε)`.
pub fn scaling_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SolverConfig,
) -> Result<ScalingReport, EotError> {
    let eps = cfg.epsilon;
    let c = cost.matrix(mu, nu)?;
    let direct = solve_matrix(mu.weights(), nu.weights(), c.clone(), cfg)?.value;
    let unit = SolverConfig { epsilon: 1.0, ..*cfg };
    let rescaled = eps * solve_matrix(mu.weights(), nu.weights(), c / eps, &unit)?.value;
    let gap = (direct - rescaled).abs();
    Ok(ScalingReport {
        direct,
        rescaled,
        gap,
        passed: gap <= SCALING_TOL * (1.0 + direct.abs()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialBoundsReport {
    pub sup_f: f64,
    pub sup_g: f64,
    /// `C_p (r+s)^p`.
    pub sup_bound: f64,
    pub lipschitz_f: f64,
    pub lipschitz_g: f64,
    /// `C_p (r+s)^{p−1}`.
    pub lipschitz_bound: f64,
    pub passed: bool,
}

/// Checks the sup-norm bound `|f|, |g| ≤ C_p (r+s)^p` and the Lipschitz bound
/// `C_p (r+s)^{p−1}` on all atom pairs, each with additive `slack`.
pub fn potential_bounds_check(
    sol: &EotSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    r: f64,
    s: f64,
    cost: &CostSpec,
    slack: f64,
) -> Result<PotentialBoundsReport, EotError> {
    for (which, m, radius) in [("first", mu, r), ("second", nu, s)] {
        if m.points().iter().any(|x| norm(x) > radius) {
            return Err(EotError::SupportOutsideBall { which, radius });
        }
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let lip = |v: &[f64], m: &DiscreteMeasure| {
        let mut best = 0.0f64;
        for i in 0..m.len() {
            for k in i + 1..m.len() {
                let d = distance(m.point(i), m.point(k));
                if d > 0.0 {
                    best = best.max((v[i] - v[k]).abs() / d);
                }
            }
        }
        best
    };
    let (p, c_p) = (cost.p(), cost.c_p());
    let sup_bound = c_p * (r + s).powf(p);
    let lipschitz_bound = c_p * (r + s).powf(p - 1.0);
    let sup_f = sup(&sol.f);
    let sup_g = sup(&sol.g);
    let lipschitz_f = lip(&sol.f, mu);
    let lipschitz_g = lip(&sol.g, nu);
    let passed = sup_f.max(sup_g) <= sup_bound + slack && lipschitz_f.max(lipschitz_g) <= lipschitz_bound + slack;
    Ok(PotentialBoundsReport {
        sup_f,
        sup_g,
        sup_bound,
        lipschitz_f,
        lipschitz_g,
        lipschitz_bound,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::PointCloud;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tight(eps: f64) -> SolverConfig {
        SolverConfig { tolerance: 1e-13, max_iterations: 1_000_000, epsilon: eps }
    }

    fn line(xs: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(PointCloud::from_scalars(xs)).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> DiscreteMeasure {
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-spread..spread)).collect();
        let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        DiscreteMeasure::from_masses(PointCloud::new(d, data).unwrap(), masses).unwrap()
    }

    #[test]
    fn dirac_to_dirac() {
        let cost = CostSpec::power(2.0).unwrap();
        for eps in [0.01, 1.0, 50.0] {
            let sol = solve(&line(&[0.0]), &line(&[1.0]), &cost, &tight(eps)).unwrap();
            assert!((sol.value - 1.0).abs() < 1e-12);
            assert!((sol.plan[[0, 0]] - 1.0).abs() < 1e-12);
            assert!((density(&sol)[[0, 0]] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_symmetric_instance_against_closed_form() {
        // Plan [[t, 1/2−t], [1/2−t, t]]: stationarity gives t/(1/2−t) = e^{1/ε}.
        let cost = CostSpec::power(2.0).unwrap();
        let m = line(&[0.0, 1.0]);
        let sol = solve(&m, &m, &cost, &tight(1.0)).unwrap();
        let e = 1.0f64.exp();
        let t = 0.5 * e / (1.0 + e);
        let exact = (1.0 - 2.0 * t) + 2.0 * t * (4.0 * t).ln() + (1.0 - 2.0 * t) * (2.0 * (1.0 - 2.0 * t)).ln();
        assert!((sol.value - exact).abs() < 1e-10, "{} vs {exact}", sol.value);
    }

    #[test]
    fn invariants_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cost = CostSpec::power(2.0).unwrap();
        for _ in 0..20 {
            let mu = random_measure(&mut rng, 7, 2, 1.0);
            let nu = random_measure(&mut rng, 5, 2, 1.0);
            let eps = rng.random_range(0.05..2.0);
            let sol = solve(&mu, &nu, &cost, &tight(eps)).unwrap();
            assert!(sol.residual <= 1e-12);
            let p = density(&sol);
            for ((i, j), &pi) in sol.plan.indexed_iter() {
                let formula = mu.weights()[i] * nu.weights()[j] * p[[i, j]];
                assert!((pi - formula).abs() <= 1e-10 * formula);
            }
            let int_f: f64 = mu.weights().iter().zip(&sol.f).map(|(w, v)| w * v).sum();
            let int_g: f64 = nu.weights().iter().zip(&sol.g).map(|(w, v)| w * v).sum();
            assert!((int_f - sol.value / 2.0).abs() < 1e-10);
            assert!((int_g - sol.value / 2.0).abs() < 1e-10);
            // density marginal identity
            for i in 0..mu.len() {
                let row: f64 = (0..nu.len()).map(|j| nu.weights()[j] * p[[i, j]]).sum();
                assert!((row - 1.0).abs() < 1e-8);
            }
            let primal = primal_value(&sol.plan, &mu, &nu, &cost, eps).unwrap();
            let dual = dual_value(&sol.f, &sol.g, &mu, &nu, &cost, eps).unwrap();
            assert_eq!(primal, sol.value);
            assert!((primal - dual).abs() < 1e-8, "gap {}", primal - dual);
        }
    }

    #[test]
    fn product_plan_has_zero_entropy() {
        let cost = CostSpec::power(2.0).unwrap();
        let mu = line(&[0.0, 1.0, 3.0]);
        let nu = line(&[-1.0, 2.0]);
        let plan = Array2::from_shape_fn((3, 2), |(i, j)| mu.weights()[i] * nu.weights()[j]);
        let v = primal_value(&plan, &mu, &nu, &cost, 0.7).unwrap();
        let expected: f64 = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| plan[[i, j]] * cost.eval(mu.point(i), nu.point(j)).unwrap())
            .sum();
        assert!((v - expected).abs() < 1e-14);
        let one = Array2::from_elem((1, 1), 1.0);
        assert_eq!(primal_value(&one, &line(&[0.0]), &line(&[2.0]), &cost, 3.0).unwrap(), 4.0);
    }

    #[test]
    fn primal_rejects_mass_off_the_product_support() {
        let cost = CostSpec::power(2.0).unwrap();
        let pts = PointCloud::from_scalars(&[0.0, 1.0]);
        let mu = DiscreteMeasure::new(pts, vec![1.0, 0.0]).unwrap();
        let nu = line(&[0.5]);
        let plan = Array2::from_shape_vec((2, 1), vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            primal_value(&plan, &mu, &nu, &cost, 1.0),
            Err(EotError::AbsoluteContinuityViolation { i: 1, j: 0, .. })
        ));
    }

    #[test]
    fn zero_weight_atoms_are_tolerated() {
        let cost = CostSpec::power(2.0).unwrap();
        let pts = PointCloud::from_scalars(&[0.0, 1.0, 4.0]);
        let mu = DiscreteMeasure::new(pts, vec![0.5, 0.5, 0.0]).unwrap();
        let nu = line(&[0.0, 1.0]);
        let with_zero = solve(&mu, &nu, &cost, &tight(0.5)).unwrap();
        let without = solve(&line(&[0.0, 1.0]), &nu, &cost, &tight(0.5)).unwrap();
        assert!((with_zero.value - without.value).abs() < 1e-12);
        assert_eq!(with_zero.plan.row(2).sum(), 0.0);
    }

    #[test]
    fn dual_value_examples() {
        let zero = CostSpec::custom(|_| 0.0, 2.0, 1.0).unwrap();
        let mu = line(&[0.0, 1.0]);
        assert_eq!(dual_value(&[0.0, 0.0], &[0.0, 0.0], &mu, &mu, &zero, 1.0).unwrap(), 0.0);

        let cost = CostSpec::power(2.0).unwrap();
        let (x, y) = (line(&[0.0]), line(&[3.0]));
        let sol = solve(&x, &y, &cost, &tight(2.0)).unwrap();
        assert!((dual_value(&sol.f, &sol.g, &x, &y, &cost, 2.0).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn weak_duality_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cost = CostSpec::power(2.0).unwrap();
        let mu = random_measure(&mut rng, 4, 2, 1.0);
        let nu = random_measure(&mut rng, 4, 2, 1.0);
        let product = Array2::from_shape_fn((4, 4), |(i, j)| mu.weights()[i] * nu.weights()[j]);
        let eps = 0.5;
        let primal = primal_value(&product, &mu, &nu, &cost, eps).unwrap();
        for _ in 0..500 {
            let f: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(dual_value(&f, &g, &mu, &nu, &cost, eps).unwrap() <= primal + 1e-9);
        }
    }

    #[test]
    fn constant_cost_gives_product_plan() {
        let cost = CostSpec::custom(|_| 0.0, 2.0, 1.0).unwrap();
        let mu = line(&[0.0, 1.0, 2.0]);
        let nu = line(&[5.0, 7.0, 9.0]);
        let sol = solve(&mu, &nu, &cost, &tight(0.3)).unwrap();
        for &p in density(&sol).iter() {
            assert!((p - 1.0).abs() < 1e-12);
        }
        assert!(sol.value.abs() < 1e-12);
    }

    #[test]
    fn small_epsilon_triggers_warm_start_and_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cost = CostSpec::power(2.0).unwrap();
        let mu = random_measure(&mut rng, 30, 2, 3.0);
        let nu = random_measure(&mut rng, 30, 2, 3.0);
        let c = cost.matrix(&mu, &nu).unwrap();
        assert!(epsilon_schedule(&c, 0.01).len() > 1);
        let sol = solve(&mu, &nu, &cost, &SolverConfig { tolerance: 1e-9, max_iterations: 200_000, epsilon: 0.01 })
            .unwrap();
        assert!(sol.residual <= 1e-9);
        assert!(sol.value.is_finite());
    }

    #[test]
    fn nearly_deterministic_plan_converges() {
        // Sinkhorn contracts by about 1 − 8e^{−Δ/2ε} per sweep here, roughly
        // 1 − 7e-7; the Newton polish has to finish the job.
        let mu = line(&[0.0, 3.0]);
        let nu = line(&[0.1, 2.0]);
        let cost = CostSpec::power(2.0).unwrap();
        let eps = 0.35;
        let cfg = SolverConfig { tolerance: 1e-12, max_iterations: 100_000, epsilon: eps };
        let sol = solve(&mu, &nu, &cost, &cfg).unwrap();
        assert!(sol.residual <= 1e-12);
        assert!(sol.iterations < 10_000, "{} iterations", sol.iterations);
        let c = [[0.01, 4.0], [8.41, 1.0]];
        let delta = c[0][0] + c[1][1] - c[0][1] - c[1][0];
        let q = (-delta / (2.0 * eps)).exp();
        let t = 0.5 * q / (1.0 + q);
        let s = 0.5 - t;
        let want = t * (c[0][0] + c[1][1])
            + s * (c[0][1] + c[1][0])
            + 2.0 * eps * (t * (4.0 * t).ln() + s * (4.0 * s).ln());
        assert!((sol.value - want).abs() < 1e-10, "{} vs {want}", sol.value);
    }

    #[test]
    fn tiny_epsilon_sweep_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cost = CostSpec::power(2.0).unwrap();
        for k in 0..40 {
            let mu = random_measure(&mut rng, 2 + k % 6, 2, 1.0);
            let nu = random_measure(&mut rng, 2 + k % 5, 2, 1.0);
            let cfg = SolverConfig { tolerance: 1e-10, max_iterations: 1_000_000, epsilon: 0.02 };
            let sol = solve(&mu, &nu, &cost, &cfg).unwrap();
            assert!(sol.residual <= 1e-10, "instance {k}");
        }
    }

    #[test]
    fn iteration_cap_reports_diagnostics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cost = CostSpec::power(2.0).unwrap();
        let mu = random_measure(&mut rng, 10, 2, 1.0);
        let nu = random_measure(&mut rng, 10, 2, 1.0);
        let cfg = SolverConfig { tolerance: 1e-14, max_iterations: 2, epsilon: 0.01 };
        match solve(&mu, &nu, &cost, &cfg) {
            Err(EotError::MaxIterationsExceeded { iterations, last, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.plan.dim(), (10, 10));
            }
            other => panic!("expected iteration cap, got {other:?}"),
        }
    }

    #[test]
    fn overflowing_cost_is_rejected() {
        let cost = CostSpec::power(2.0).unwrap();
        let err = solve(&line(&[0.0]), &line(&[1e200]), &cost, &tight(1.0)).unwrap_err();
        assert!(matches!(err, EotError::NonFiniteKernel { .. }));
        let err = solve(&line(&[0.0]), &line(&[1e150]), &cost, &tight(1e-20)).unwrap_err();
        assert!(matches!(err, EotError::NonFiniteKernel { .. }));
    }

    #[test]
    fn value_nondecreasing_in_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cost = CostSpec::power(2.0).unwrap();
        let mu = random_measure(&mut rng, 8, 2, 1.0);
        let nu = random_measure(&mut rng, 6, 2, 1.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..15 {
            let eps = 0.02 * 1.5f64.powi(k);
            let v = solve(&mu, &nu, &cost, &tight(eps)).unwrap().value;
            assert!(v >= prev - 1e-10, "ε={eps}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cost = CostSpec::power(3.0).unwrap();
        let mu = random_measure(&mut rng, 6, 2, 1.0);
        let nu = random_measure(&mut rng, 5, 2, 1.0);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let rows: Vec<Vec<f64>> = perm.iter().map(|&k| mu.point(k).to_vec()).collect();
        let weights: Vec<f64> = perm.iter().map(|&k| mu.weights()[k]).collect();
        let permuted = DiscreteMeasure::new(PointCloud::from_rows(&rows).unwrap(), weights).unwrap();
        let a = solve(&mu, &nu, &cost, &tight(0.4)).unwrap();
        let b = solve(&permuted, &nu, &cost, &tight(0.4)).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        for (new_i, &old_i) in perm.iter().enumerate() {
            assert!((a.f[old_i] - b.f[new_i]).abs() < 1e-9);
            for j in 0..nu.len() {
                assert!((a.plan[[old_i, j]] - b.plan[[new_i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_identity() {
        let cost = CostSpec::power(2.0).unwrap();
        let mu = line(&[0.0, 0.5, 2.0]);
        let nu = line(&[1.0, -1.0]);
        let r = scaling_check(&mu, &nu, &cost, &tight(1.0)).unwrap();
        assert_eq!(r.gap, 0.0);
        let r = scaling_check(&line(&[0.0]), &line(&[2.0]), &cost, &tight(0.37)).unwrap();
        assert!((r.direct - 4.0).abs() < 1e-12 && (r.rescaled - 4.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mu = random_measure(&mut rng, 6, 2, 1.0);
        let nu = random_measure(&mut rng, 6, 2, 1.0);
        assert!(scaling_check(&mu, &nu, &cost, &tight(0.3)).unwrap().passed);
    }

    #[test]
    fn potential_bounds_examples() {
        let cost = CostSpec::power(2.0).unwrap();
        let zero = line(&[0.0]);
        let sol = solve(&zero, &zero, &cost, &tight(1.0)).unwrap();
        let rep = potential_bounds_check(&sol, &zero, &zero, 1.0, 1.0, &cost, 0.0).unwrap();
        assert_eq!(rep.sup_f, 0.0);
        assert!(rep.passed);

        let pm = line(&[-1.0, 1.0]);
        let sol = solve(&pm, &pm, &cost, &tight(0.5)).unwrap();
        let rep = potential_bounds_check(&sol, &pm, &pm, 1.0, 1.0, &cost, 1e-6).unwrap();
        assert_eq!(rep.sup_bound, 8.0);
        assert!(rep.passed);

        let outside = line(&[3.0]);
        let sol = solve(&outside, &zero, &cost, &tight(1.0)).unwrap();
        assert!(potential_bounds_check(&sol, &outside, &zero, 1.0, 1.0, &cost, 0.0).is_err());
    }

    #[test]
    fn serialization_shapes() {
        let cost = CostSpec::power(2.0).unwrap();
        let sol = solve(&line(&[0.0, 1.0]), &line(&[0.5]), &cost, &tight(1.0)).unwrap();
        let json: serde_json::Value = serde_json::from_str(&sol.to_json().unwrap()).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["epsilon", "f", "g", "iterations", "residual", "value"]);
        let mut csv = Vec::new();
        sol.write_plan_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("i,j,mass\n0,0,5.0"));
    }
}

//! Alternating estimators for the lp-fitting problem
//! `min_{|u|=1, x} sum_m (|y_m u_m - a_m^H x|^2 + eps)^(p/2)`, `0 < p <= 2`.
//!
//! Both solvers alternate an exact phase step in `u` with an inexact
//! majorized step in `x`: AltIRLS minimizes the reweighted least-squares
//! surrogate in closed form, AltGD takes one gradient step of it. The
//! surrogate weight `w_m = (p/2)(|y_m u_m - a_m^H x|^2 + eps)^((p-2)/2)`
//! is the unique minimizer of `w t^2 + phi_p(w)` over `w >= 0`, which makes
//! the surrogate a tight upper bound and the cost sequence nonincreasing
//! (for the gradient variant, when the step is the leading eigenvalue of
//! `A^H W^2 A`). Weights enter everywhere as `W^2 = diag(w)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linop::{BackendKind, MeasurementOperator};
use crate::signal::{inner, norm_sq, phase_factor, ComplexSignal};

/// Rule for the gradient step size `1/mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `mu = trace(W^2) = sum_m w_m`; cheap upper-bound heuristic.
    TraceHeuristic,
    /// `mu = lambda_max(A^H W^2 A)` by power iteration; guarantees descent.
    LeadingEigenvalue,
}

/// Visit order for the block-gradient variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSchedule {
    Cyclic,
    /// Blocks drawn uniformly with replacement; the seed makes runs
    /// reproducible bit for bit.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Irls,
    Gd,
    GdAccel {
        /// Reset the extrapolation whenever the cost increases.
        restart: bool,
    },
    GdBlock {
        block_size: usize,
        schedule: BlockSchedule,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Fitting exponent in `(0, 2]`.
    pub p: f64,
    /// Smoothing for the non-differentiable corner; must be positive when
    /// `p < 2`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative tolerance on the misfit change, see [`stopping`].
    pub rel_tol: f64,
    pub variant: Variant,
    pub step_rule: StepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1.3,
            epsilon: 1e-6,
            max_iters: 1000,
            rel_tol: 1e-7,
            variant: Variant::Irls,
            step_rule: StepRule::TraceHeuristic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 2.0) {
            return Err(Error::invalid("p", "must lie in (0, 2]"));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
        }
        if self.p < 2.0 && self.epsilon == 0.0 {
            return Err(Error::invalid("epsilon", "must be positive when p < 2"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !self.rel_tol.is_finite() || self.rel_tol < 0.0 {
            return Err(Error::invalid("rel_tol", "must be finite and nonnegative"));
        }
        if let Variant::GdBlock { block_size, .. } = self.variant {
            if block_size <= 1 {
                return Err(Error::invalid(
                    "block_size",
                    "must be larger than one; single-measurement blocks lose the reweighting",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Tolerance,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIters => "max_iters",
        }
    }
}

/// Per-iteration cost history of a solver run; `costs.len() == iterations`.
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub costs: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

/// `sum_m (|y_m u_m - a_m^H x|^2 + eps)^(p/2)`.
pub fn cost(
    y: &[f64],
    op: &MeasurementOperator,
    x: &[Complex64],
    u: &[Complex64],
    p: f64,
    eps: f64,
) -> Result<f64> {
    check_measurement_len(y, op)?;
    if u.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "cost",
            expected: y.len(),
            got: u.len(),
        });
    }
    let ax = op.forward(x)?;
    Ok(cost_from_parts(y, &ax, u, p, eps))
}

pub(crate) fn cost_from_parts(y: &[f64], ax: &[Complex64], u: &[Complex64], p: f64, eps: f64) -> f64 {
    y.iter()
        .zip(ax)
        .zip(u)
        .map(|((&yi, a), ui)| ((yi * ui - a).norm_sqr() + eps).powf(p / 2.0))
        .sum()
}

/// The optimal surrogate weight `(p/2)(t^2 + eps)^((p-2)/2)` for a squared
/// residual `t^2`; only defined for `0 < p < 2`.
pub fn majorizer_weight(residual_sq: f64, p: f64, eps: f64) -> Result<f64> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::invalid("p", "the reweighting formula requires p in (0, 2)"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    if residual_sq < 0.0 {
        return Err(Error::invalid("residual_sq", "must be nonnegative"));
    }
    Ok(p / 2.0 * (residual_sq + eps).powf((p - 2.0) / 2.0))
}

/// Conjugate term `phi_p(w) = (2-p)/2 ((2/p) w)^(p/(p-2)) + eps w`, so that
/// `(t^2 + eps)^(p/2) = min_{w>=0} w t^2 + phi_p(w)`.
pub fn majorizer_penalty(w: f64, p: f64, eps: f64) -> f64 {
    (2.0 - p) / 2.0 * ((2.0 / p) * w).powf(p / (p - 2.0)) + eps * w
}

fn weights_into(y: &[f64], ax: &[Complex64], u: &[Complex64], p: f64, eps: f64, w: &mut [f64]) {
    if p == 2.0 {
        w.fill(1.0);
        return;
    }
    let exponent = (p - 2.0) / 2.0;
    for ((wi, (&yi, a)), ui) in w.iter_mut().zip(y.iter().zip(ax)).zip(u) {
        let r2 = (yi * ui - a).norm_sqr();
        *wi = p / 2.0 * (r2 + eps).powf(exponent);
    }
}

/// Exact conditional phase step: for every `m`, the returned unit-modulus
/// `u_m` minimizes `|y_m u_m - a_m^H x|` (negative `y_m` flips the sign).
pub fn u_step(y: &[f64], op: &MeasurementOperator, x: &[Complex64]) -> Result<Vec<Complex64>> {
    check_measurement_len(y, op)?;
    let ax = op.forward(x)?;
    Ok(u_from_ax(y, &ax))
}

pub(crate) fn u_from_ax(y: &[f64], ax: &[Complex64]) -> Vec<Complex64> {
    y.iter()
        .zip(ax)
        .map(|(&yi, a)| {
            let f = phase_factor(*a);
            if yi < 0.0 {
                -f
            } else {
                f
            }
        })
        .collect()
}

/// Exact minimizer of `||W (y .* u) - W A x||^2` with `W = diag(sqrt(w))`.
///
/// Solved through a QR factorization of the weighted matrix where a dense
/// representation is affordable; backends with a diagonal Gram matrix and
/// uniform weights use the closed-form normal equations, and large
/// transform-backed systems fall back to conjugate gradients.
pub fn x_step_irls(
    y: &[f64],
    op: &MeasurementOperator,
    u: &[Complex64],
    w: &[f64],
) -> Result<Vec<Complex64>> {
    check_measurement_len(y, op)?;
    let m = op.measurements();
    if u.len() != m || w.len() != m {
        return Err(Error::DimensionMismatch {
            context: "x_step_irls",
            expected: m,
            got: if u.len() != m { u.len() } else { w.len() },
        });
    }
    for (i, &wi) in w.iter().enumerate() {
        if !(wi > 0.0) || !wi.is_finite() {
            return Err(Error::invalid("w", format!("weight {i} is not positive and finite")));
        }
    }
    x_step_impl(y, op, u, w)
}

const DENSE_SOLVE_LIMIT: usize = 1 << 20;

fn x_step_impl(
    y: &[f64],
    op: &MeasurementOperator,
    u: &[Complex64],
    w: &[f64],
) -> Result<Vec<Complex64>> {
    let m = op.measurements();
    let n = op.signal_len();
    let rhs: Vec<Complex64> = y.iter().zip(u).map(|(&yi, ui)| yi * ui).collect();

    let uniform = w.iter().all(|&wi| wi == w[0]);
    if uniform {
        if let Some(diag) = op.gram_diagonal() {
            // Uniform weights cancel: x = (A^H A)^{-1} A^H (y .* u).
            let b = op.adjoint(&rhs)?;
            let leading = diag.iter().cloned().fold(0.0, f64::max);
            let mut x = Vec::with_capacity(n);
            for (i, (bi, &di)) in b.iter().zip(&diag).enumerate() {
                if di <= 1e-24 * leading {
                    return Err(Error::RankDeficient {
                        index: i,
                        diag: di,
                        leading,
                    });
                }
                x.push(bi / di);
            }
            return Ok(x);
        }
    }

    let dense_ok = matches!(op.backend_kind(), BackendKind::Dense)
        || (matches!(op.backend_kind(), BackendKind::MaskedDft) && m * n <= DENSE_SOLVE_LIMIT);
    if dense_ok {
        weighted_qr_solve(op, &rhs, w)
    } else {
        cg_normal_equations(op, &rhs, w)
    }
}

fn weighted_qr_solve(
    op: &MeasurementOperator,
    rhs: &[Complex64],
    w: &[f64],
) -> Result<Vec<Complex64>> {
    let a = op.dense_matrix();
    let m = op.measurements();
    let n = op.signal_len();
    let mut b = nalgebra::DMatrix::<Complex64>::zeros(m, n);
    let mut wrhs = nalgebra::DVector::<Complex64>::zeros(m);
    for r in 0..m {
        let s = w[r].sqrt();
        for c in 0..n {
            b[(r, c)] = a[(r, c)] * s;
        }
        wrhs[r] = rhs[r] * s;
    }
    let qr = b.qr();
    let r_mat = qr.r();
    let leading = (0..n).map(|i| r_mat[(i, i)].norm()).fold(0.0, f64::max);
    for i in 0..n {
        let d = r_mat[(i, i)].norm();
        if d <= 1e-12 * leading || leading == 0.0 {
            return Err(Error::RankDeficient {
                index: i,
                diag: d,
                leading,
            });
        }
    }
    let qtb = qr.q().ad_mul(&wrhs);
    let x = r_mat
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient {
            index: 0,
            diag: 0.0,
            leading,
        })?;
    Ok(x.data.into())
}

/// Conjugate gradients on the weighted normal equations
/// `A^H W^2 A x = A^H W^2 (y .* u)`; matrix-free.
fn cg_normal_equations(
    op: &MeasurementOperator,
    rhs: &[Complex64],
    w: &[f64],
) -> Result<Vec<Complex64>> {
    let n = op.signal_len();
    let apply = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let mut f = op.forward(v)?;
        for (fi, &wi) in f.iter_mut().zip(w) {
            *fi *= wi;
        }
        op.adjoint(&f)
    };
    let weighted: Vec<Complex64> = rhs.iter().zip(w).map(|(r, &wi)| r * wi).collect();
    let b = op.adjoint(&weighted)?;
    let b_norm = norm_sq(&b).sqrt();
    let mut x = vec![Complex64::default(); n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = norm_sq(&r);
    let max_iters = 10 * n + 100;
    for _ in 0..max_iters {
        let hp = apply(&p)?;
        let php = inner(&p, &hp).re;
        if php <= 0.0 {
            return Err(Error::RankDeficient {
                index: 0,
                diag: php,
                leading: b_norm,
            });
        }
        let alpha = rs / php;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        let rs_new = norm_sq(&r);
        if rs_new.sqrt() <= 1e-12 * b_norm {
            break;
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Ok(x)
}

/// Gradient of `||W (y .* u) - W A x||^2` in the `A^H W^2 (A x - y .* u)`
/// convention; computed with one forward and one adjoint application.
pub fn gradient(
    y: &[f64],
    op: &MeasurementOperator,
    x: &[Complex64],
    u: &[Complex64],
    w: &[f64],
) -> Result<Vec<Complex64>> {
    check_measurement_len(y, op)?;
    let ax = op.forward(x)?;
    gradient_from_ax(op, &ax, y, u, w)
}

fn gradient_from_ax(
    op: &MeasurementOperator,
    ax: &[Complex64],
    y: &[f64],
    u: &[Complex64],
    w: &[f64],
) -> Result<Vec<Complex64>> {
    let weighted: Vec<Complex64> = ax
        .iter()
        .zip(y.iter().zip(u))
        .zip(w)
        .map(|((a, (&yi, ui)), &wi)| wi * (a - yi * ui))
        .collect();
    op.adjoint(&weighted)
}

/// Step-size denominator `mu` for the gradient variants.
pub fn step_size(op: &MeasurementOperator, w: &[f64], rule: StepRule) -> Result<f64> {
    if w.len() != op.measurements() {
        return Err(Error::DimensionMismatch {
            context: "step_size",
            expected: op.measurements(),
            got: w.len(),
        });
    }
    for (i, &wi) in w.iter().enumerate() {
        if !(wi > 0.0) || !wi.is_finite() {
            return Err(Error::invalid("w", format!("weight {i} is not positive and finite")));
        }
    }
    match rule {
        StepRule::TraceHeuristic => Ok(w.iter().sum()),
        StepRule::LeadingEigenvalue => {
            let mut warm = None;
            lambda_max_weighted(op, w, &mut warm)
        }
    }
}

const POWER_ITER_TOL: f64 = 1e-6;
const POWER_ITER_CAP: usize = 200;

fn lambda_max_weighted(
    op: &MeasurementOperator,
    w: &[f64],
    warm: &mut Option<Vec<Complex64>>,
) -> Result<f64> {
    let n = op.signal_len();
    let start = warm
        .take()
        .unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n]);
    let (lambda, v) = power_iteration(
        |v| {
            let mut f = op.forward(v)?;
            for (fi, &wi) in f.iter_mut().zip(w) {
                *fi *= wi;
            }
            op.adjoint(&f)
        },
        start,
        POWER_ITER_TOL,
        POWER_ITER_CAP,
    )?;
    *warm = Some(v);
    Ok(lambda)
}

/// Power iteration on a Hermitian PSD map; returns the Rayleigh estimate and
/// the final unit vector.
fn power_iteration<F>(
    apply: F,
    start: Vec<Complex64>,
    rel_tol: f64,
    cap: usize,
) -> Result<(f64, Vec<Complex64>)>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let mut v = start;
    let vn = norm_sq(&v).sqrt();
    if vn == 0.0 {
        v.iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
    } else {
        v.iter_mut().for_each(|z| *z /= vn);
    }
    let mut lambda_prev = f64::NAN;
    for _ in 0..cap {
        let hv = apply(&v)?;
        let lambda = inner(&v, &hv).re;
        let hn = norm_sq(&hv).sqrt();
        if hn == 0.0 {
            return Ok((0.0, v));
        }
        for (vi, h) in v.iter_mut().zip(&hv) {
            *vi = h / hn;
        }
        if lambda_prev.is_finite()
            && (lambda - lambda_prev).abs() <= rel_tol * lambda.abs().max(f64::MIN_POSITIVE)
        {
            return Ok((lambda, v));
        }
        lambda_prev = lambda;
    }
    Ok((lambda_prev, v))
}

/// Principal eigenvector of `sum_i y_i^2 a_i a_i^H` (power iteration, at most
/// 100 steps or relative change below 1e-8), scaled to `sqrt(mean(y^2))`.
pub fn spectral_init<R: Rng + ?Sized>(
    y: &[f64],
    op: &MeasurementOperator,
    rng: &mut R,
) -> Result<ComplexSignal> {
    check_measurement_len(y, op)?;
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("y", "all-zero measurements"));
    }
    let y2: Vec<f64> = y.iter().map(|&v| v * v).collect();
    let n = op.signal_len();
    let start: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let (_, v) = power_iteration(
        |v| {
            let mut f = op.forward(v)?;
            for (fi, &s) in f.iter_mut().zip(&y2) {
                *fi *= s;
            }
            op.adjoint(&f)
        },
        start,
        1e-8,
        100,
    )?;
    let scale = (y2.iter().sum::<f64>() / y2.len() as f64).sqrt();
    ComplexSignal::new(v.into_iter().map(|z| z * scale).collect())
}

/// Stage exponents of the warm-start schedule for a final run at `target_p`.
pub fn staged_p_schedule(target_p: f64) -> Vec<f64> {
    let mut stages = vec![1.3, 1.0];
    if target_p <= 0.6 {
        stages.push(0.7);
    }
    stages
}

/// Two- or three-stage warm start for strongly nonconvex exponents: spectral
/// initialization followed by 100 iterations at each stage exponent, run with
/// the variant of `base`.
pub fn staged_p_init<R: Rng + ?Sized>(
    y: &[f64],
    op: &MeasurementOperator,
    target_p: f64,
    base: &SolverConfig,
    rng: &mut R,
) -> Result<ComplexSignal> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(Error::invalid("target_p", "staged initialization applies to p in (0, 1)"));
    }
    let x = spectral_init(y, op, rng)?;
    staged_p_init_from(y, op, &x, target_p, base)
}

/// The staged schedule run from an existing starting point.
pub fn staged_p_init_from(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    target_p: f64,
    base: &SolverConfig,
) -> Result<ComplexSignal> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(Error::invalid("target_p", "staged initialization applies to p in (0, 1)"));
    }
    let mut x = x0.clone();
    for p_stage in staged_p_schedule(target_p) {
        let cfg = SolverConfig {
            p: p_stage,
            epsilon: base.epsilon.max(1e-12),
            max_iters: 100,
            rel_tol: 0.0,
            variant: base.variant,
            step_rule: base.step_rule,
        };
        x = solve(y, op, &x, &cfg)?.0;
    }
    Ok(x)
}

/// Misfit-based stopping rule on consecutive iterates: true when
/// `| ||y-|Ax_curr||^2 - ||y-|Ax_prev||^2 | / ||y-|Ax_prev||^2 <= rel_tol`
/// (inclusive); a zero denominator counts as converged.
pub fn stopping(
    y: &[f64],
    op: &MeasurementOperator,
    x_prev: &[Complex64],
    x_curr: &[Complex64],
    rel_tol: f64,
) -> Result<bool> {
    check_measurement_len(y, op)?;
    let m_prev = misfit_from_ax(y, &op.forward(x_prev)?);
    let m_curr = misfit_from_ax(y, &op.forward(x_curr)?);
    Ok(stopping_from_misfits(m_prev, m_curr, rel_tol))
}

pub fn stopping_from_misfits(misfit_prev: f64, misfit_curr: f64, rel_tol: f64) -> bool {
    if misfit_prev == 0.0 {
        return true;
    }
    (misfit_curr - misfit_prev).abs() / misfit_prev <= rel_tol
}

pub(crate) fn misfit_from_ax(y: &[f64], ax: &[Complex64]) -> f64 {
    y.iter()
        .zip(ax)
        .map(|(&yi, a)| {
            let d = yi - a.norm();
            d * d
        })
        .sum()
}

/// Dispatches on `config.variant`.
pub fn solve(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    config: &SolverConfig,
) -> Result<(ComplexSignal, SolverTrace)> {
    match config.variant {
        Variant::Irls => alt_irls(y, op, x0, config),
        Variant::Gd => alt_gd(y, op, x0, config),
        Variant::GdAccel { .. } => alt_gd_accel(y, op, x0, config),
        Variant::GdBlock { .. } => alt_gd_block(y, op, x0, config),
    }
}

fn validate_problem(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    config: &SolverConfig,
) -> Result<()> {
    config.validate()?;
    check_measurement_len(y, op)?;
    if x0.len() != op.signal_len() {
        return Err(Error::DimensionMismatch {
            context: "x0",
            expected: op.signal_len(),
            got: x0.len(),
        });
    }
    Ok(())
}

fn check_measurement_len(y: &[f64], op: &MeasurementOperator) -> Result<()> {
    if y.len() != op.measurements() {
        return Err(Error::DimensionMismatch {
            context: "measurements",
            expected: op.measurements(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Alternating IRLS: per iteration, a closed-form weighted least-squares
/// step in `x` from the previous `(u, w)`, then the exact phase step and the
/// weight refresh.
pub fn alt_irls(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    config: &SolverConfig,
) -> Result<(ComplexSignal, SolverTrace)> {
    validate_problem(y, op, x0, config)?;
    let m = op.measurements();
    let mut x = x0.to_vec();
    let mut ax = op.forward(&x)?;
    let mut u = u_from_ax(y, &ax);
    let mut w = vec![0.0; m];
    weights_into(y, &ax, &u, config.p, config.epsilon, &mut w);
    let mut misfit_prev = misfit_from_ax(y, &ax);

    let mut costs = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    for r in 1..=config.max_iters {
        x = x_step_impl(y, op, &u, &w)?;
        ax = op.forward(&x)?;
        u = u_from_ax(y, &ax);
        weights_into(y, &ax, &u, config.p, config.epsilon, &mut w);
        costs.push(cost_from_parts(y, &ax, &u, config.p, config.epsilon));
        iterations = r;
        let misfit_curr = misfit_from_ax(y, &ax);
        if stopping_from_misfits(misfit_prev, misfit_curr, config.rel_tol) {
            termination = Termination::Tolerance;
            break;
        }
        misfit_prev = misfit_curr;
    }
    Ok((
        ComplexSignal::new(x)?,
        SolverTrace {
            costs,
            iterations,
            termination,
        },
    ))
}

/// Alternating gradient descent: weight refresh, one step of size `1/mu`
/// along `A^H W^2 (A x - y .* u)`, then the phase step.
pub fn alt_gd(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    config: &SolverConfig,
) -> Result<(ComplexSignal, SolverTrace)> {
    validate_problem(y, op, x0, config)?;
    let m = op.measurements();
    let mut x = x0.to_vec();
    let mut ax = op.forward(&x)?;
    let mut u = u_from_ax(y, &ax);
    let mut w = vec![0.0; m];
    let mut misfit_prev = misfit_from_ax(y, &ax);
    let mut warm = None;

    let mut costs = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    for r in 1..=config.max_iters {
        weights_into(y, &ax, &u, config.p, config.epsilon, &mut w);
        let mu = match config.step_rule {
            StepRule::TraceHeuristic => w.iter().sum(),
            StepRule::LeadingEigenvalue => lambda_max_weighted(op, &w, &mut warm)?,
        };
        let g = gradient_from_ax(op, &ax, y, &u, &w)?;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= gi / mu;
        }
        ax = op.forward(&x)?;
        u = u_from_ax(y, &ax);
        costs.push(cost_from_parts(y, &ax, &u, config.p, config.epsilon));
        iterations = r;
        let misfit_curr = misfit_from_ax(y, &ax);
        if stopping_from_misfits(misfit_prev, misfit_curr, config.rel_tol) {
            termination = Termination::Tolerance;
            break;
        }
        misfit_prev = misfit_curr;
    }
    Ok((
        ComplexSignal::new(x)?,
        SolverTrace {
            costs,
            iterations,
            termination,
        },
    ))
}

/// Extrapolation weight recurrence `t <- (1 + sqrt(1 + 4 t^2)) / 2`.
pub fn nesterov_next_t(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

/// AltGD with extrapolation: the gradient (and its weights) are evaluated at
/// `z = x + (t_prev - 1)/t (x - x_prev)`. With restart enabled, an iteration
/// whose cost increases is retaken as a plain gradient step and the momentum
/// schedule is reset.
pub fn alt_gd_accel(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    config: &SolverConfig,
) -> Result<(ComplexSignal, SolverTrace)> {
    validate_problem(y, op, x0, config)?;
    let restart = match config.variant {
        Variant::GdAccel { restart } => restart,
        _ => true,
    };
    let m = op.measurements();
    let n = op.signal_len();
    let mut x = x0.to_vec();
    let mut x_prev = x.clone();
    let mut ax = op.forward(&x)?;
    let mut u = u_from_ax(y, &ax);
    let mut w = vec![0.0; m];
    let mut t = 1.0;
    let mut cost_last = {
        weights_into(y, &ax, &u, config.p, config.epsilon, &mut w);
        cost_from_parts(y, &ax, &u, config.p, config.epsilon)
    };
    let mut misfit_prev = misfit_from_ax(y, &ax);
    let mut warm = None;

    let mut costs = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    for r in 1..=config.max_iters {
        let t_next = nesterov_next_t(t);
        let beta = (t - 1.0) / t_next;
        let mut z = vec![Complex64::default(); n];
        for i in 0..n {
            z[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        let az = op.forward(&z)?;
        weights_into(y, &az, &u, config.p, config.epsilon, &mut w);
        let mu = match config.step_rule {
            StepRule::TraceHeuristic => w.iter().sum(),
            StepRule::LeadingEigenvalue => lambda_max_weighted(op, &w, &mut warm)?,
        };
        let g = gradient_from_ax(op, &az, y, &u, &w)?;
        let mut x_new: Vec<Complex64> = (0..n).map(|i| z[i] - g[i] / mu).collect();
        let mut ax_new = op.forward(&x_new)?;
        let mut u_new = u_from_ax(y, &ax_new);
        let mut c_new = cost_from_parts(y, &ax_new, &u_new, config.p, config.epsilon);

        if restart && c_new > cost_last {
            // Extrapolation overshot; retake as a plain step from x.
            weights_into(y, &ax, &u, config.p, config.epsilon, &mut w);
            let mu = match config.step_rule {
                StepRule::TraceHeuristic => w.iter().sum(),
                StepRule::LeadingEigenvalue => lambda_max_weighted(op, &w, &mut warm)?,
            };
            let g = gradient_from_ax(op, &ax, y, &u, &w)?;
            x_new = (0..n).map(|i| x[i] - g[i] / mu).collect();
            ax_new = op.forward(&x_new)?;
            u_new = u_from_ax(y, &ax_new);
            c_new = cost_from_parts(y, &ax_new, &u_new, config.p, config.epsilon);
            t = 1.0;
        } else {
            t = t_next;
        }

        x_prev = std::mem::replace(&mut x, x_new);
        ax = ax_new;
        u = u_new;
        cost_last = c_new;
        costs.push(c_new);
        iterations = r;
        let misfit_curr = misfit_from_ax(y, &ax);
        if stopping_from_misfits(misfit_prev, misfit_curr, config.rel_tol) {
            termination = Termination::Tolerance;
            break;
        }
        misfit_prev = misfit_curr;
    }
    Ok((
        ComplexSignal::new(x)?,
        SolverTrace {
            costs,
            iterations,
            termination,
        },
    ))
}

/// Block-incremental / stochastic gradient variant. One outer iteration is
/// an epoch of `ceil(M / block_size)` inner steps; each inner step refreshes
/// `u` and `w` on the visited block and descends along the block gradient
/// `A_G^H W_G^2 (A_G x - y_G .* u_G)`.
pub fn alt_gd_block(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    config: &SolverConfig,
) -> Result<(ComplexSignal, SolverTrace)> {
    validate_problem(y, op, x0, config)?;
    let (block_size, schedule) = match config.variant {
        Variant::GdBlock {
            block_size,
            schedule,
        } => (block_size, schedule),
        _ => {
            return Err(Error::invalid(
                "variant",
                "alt_gd_block requires the gd_block variant",
            ))
        }
    };
    let m = op.measurements();
    let n = op.signal_len();
    let blocks: Vec<(usize, usize)> = (0..m)
        .step_by(block_size)
        .map(|lo| (lo, (lo + block_size).min(m)))
        .collect();
    let num_blocks = blocks.len();
    let mut schedule_rng = match schedule {
        BlockSchedule::Cyclic => None,
        BlockSchedule::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };

    let mut x = x0.to_vec();
    let mut ax = op.forward(&x)?;
    let mut u = u_from_ax(y, &ax);
    let mut w = vec![0.0; m];
    weights_into(y, &ax, &u, config.p, config.epsilon, &mut w);
    let mut misfit_prev = misfit_from_ax(y, &ax);
    let mut warm: Vec<Option<Vec<Complex64>>> = vec![None; num_blocks];

    let mut costs = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    let exponent = (config.p - 2.0) / 2.0;
    for r in 1..=config.max_iters {
        for step in 0..num_blocks {
            let l = match &mut schedule_rng {
                None => step,
                Some(rng) => rng.gen_range(0..num_blocks),
            };
            let (lo, hi) = blocks[l];
            let ax_full = op.forward(&x)?;
            for i in lo..hi {
                let f = phase_factor(ax_full[i]);
                u[i] = if y[i] < 0.0 { -f } else { f };
                w[i] = if config.p == 2.0 {
                    1.0
                } else {
                    let r2 = (y[i] * u[i] - ax_full[i]).norm_sqr();
                    config.p / 2.0 * (r2 + config.epsilon).powf(exponent)
                };
            }
            let mu = match config.step_rule {
                StepRule::TraceHeuristic => w[lo..hi].iter().sum::<f64>(),
                StepRule::LeadingEigenvalue => {
                    let wl = &w;
                    let start = warm[l]
                        .take()
                        .unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n]);
                    let (lambda, v) = power_iteration(
                        |vv| {
                            let mut f = op.forward(vv)?;
                            for (i, fi) in f.iter_mut().enumerate() {
                                *fi = if i >= lo && i < hi {
                                    *fi * wl[i]
                                } else {
                                    Complex64::default()
                                };
                            }
                            op.adjoint(&f)
                        },
                        start,
                        POWER_ITER_TOL,
                        POWER_ITER_CAP,
                    )?;
                    warm[l] = Some(v);
                    lambda
                }
            };
            let mut resid = vec![Complex64::default(); m];
            for i in lo..hi {
                resid[i] = w[i] * (ax_full[i] - y[i] * u[i]);
            }
            let g = op.adjoint(&resid)?;
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= gi / mu;
            }
        }
        ax = op.forward(&x)?;
        u = u_from_ax(y, &ax);
        costs.push(cost_from_parts(y, &ax, &u, config.p, config.epsilon));
        iterations = r;
        let misfit_curr = misfit_from_ax(y, &ax);
        if stopping_from_misfits(misfit_prev, misfit_curr, config.rel_tol) {
            termination = Termination::Tolerance;
            break;
        }
        misfit_prev = misfit_curr;
    }
    Ok((
        ComplexSignal::new(x)?,
        SolverTrace {
            costs,
            iterations,
            termination,
        },
    ))
}

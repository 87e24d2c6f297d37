//! ℓ1-penalized Poisson regression.
//!
//! Minimizes `(1/n) Σ_i [exp(η_i) − y_i η_i] + λ ‖θ‖₁` with
//! `η_i = θ₀ + ⟨θ, x_i⟩` and an unpenalized intercept, by proximal Newton:
//! each outer step builds the IRLS quadratic model of the smooth part, solves
//! the penalized quadratic by cyclic coordinate descent, then backtracks along
//! the resulting direction. The intercept is re-solved in closed form after
//! every outer step, so the fitted mean always equals the sample mean.
//!
//! Columns may carry penalty factors `w_k`, replacing `λ‖θ‖₁` with
//! `λ Σ w_k |θ_k|`. [`LassoProblem::standardized`] sets `w_k` to the column's
//! standard deviation, which is the same estimator as penalizing coefficients
//! of unit-variance columns.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::simulate::seeded_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LassoError {
    #[error("problem has no observations")]
    Empty,
    #[error("design column {column} has {got} rows, response has {expected}")]
    Length { column: usize, expected: usize, got: usize },
    #[error("non-finite value in design column {column}, row {row}")]
    NonFiniteDesign { column: usize, row: usize },
    #[error("response entry {row} is negative or non-finite")]
    BadResponse { row: usize },
    #[error("response is identically zero; the intercept has no finite minimizer")]
    ZeroResponse,
    #[error("penalty {0} must be finite and nonnegative")]
    BadLambda(f64),
    #[error("no convergence after {iterations} outer iterations (KKT residual {kkt_residual:e})")]
    NonConvergence {
        iterations: usize,
        kkt_residual: f64,
        last: Box<LassoFit>,
    },
    #[error("linear predictor diverged (max {max_eta:.1} above clamp)")]
    Divergent { max_eta: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("cross-validation needs 2 <= folds <= n (folds = {folds}, n = {n})")]
    Folds { folds: usize, n: usize },
    #[error("every fold reshuffle left a training fold with zero response")]
    DegenerateFold,
    #[error("penalty factor for column {column} must be positive, got {value}")]
    BadPenaltyFactor { column: usize, value: f64 },
}

/// Design (columns borrowed) and count response for one regression.
#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    columns: Vec<&'a [f64]>,
    response: &'a [f64],
    sum_y: f64,
    y_scale: f64,
    col_scale: Vec<f64>,
    /// Per-column penalty factor; infinite freezes the coefficient at zero.
    penalty: Vec<f64>,
}

impl<'a> LassoProblem<'a> {
    pub fn new(columns: Vec<&'a [f64]>, response: &'a [f64]) -> Result<Self, LassoError> {
        let n = response.len();
        if n == 0 {
            return Err(LassoError::Empty);
        }
        if let Some(row) = response.iter().position(|&y| !(y.is_finite() && y >= 0.0)) {
            return Err(LassoError::BadResponse { row });
        }
        let mut col_scale = Vec::with_capacity(columns.len());
        for (column, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(LassoError::Length {
                    column,
                    expected: n,
                    got: c.len(),
                });
            }
            if let Some(row) = c.iter().position(|v| !v.is_finite()) {
                return Err(LassoError::NonFiniteDesign { column, row });
            }
            col_scale.push(rms(c).max(1.0));
        }
        Ok(LassoProblem {
            sum_y: response.iter().sum(),
            y_scale: rms(response).max(1.0),
            penalty: vec![1.0; columns.len()],
            columns,
            response,
            col_scale,
        })
    }

    /// Replaces the penalty factors. Factors must be positive; `f64::INFINITY`
    /// keeps a coefficient at zero.
    pub fn with_penalty_factors(mut self, factors: Vec<f64>) -> Result<Self, LassoError> {
        if factors.len() != self.q() {
            return Err(LassoError::Length {
                column: factors.len(),
                expected: self.q(),
                got: factors.len(),
            });
        }
        if let Some((column, &value)) = factors.iter().enumerate().find(|(_, f)| !(**f > 0.0)) {
            return Err(LassoError::BadPenaltyFactor { column, value });
        }
        self.penalty = factors;
        Ok(self)
    }

    /// Penalizes each coefficient by its column's standard deviation (divisor
    /// n). Constant columns are indistinguishable from the intercept and are
    /// frozen at zero.
    pub fn standardized(self) -> Self {
        let factors = self
            .columns
            .iter()
            .map(|c| {
                let n = c.len() as f64;
                let mean = c.iter().sum::<f64>() / n;
                let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        LassoProblem { penalty: factors, ..self }
    }

    pub fn penalty_factors(&self) -> &[f64] {
        &self.penalty
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn q(&self) -> usize {
        self.columns.len()
    }

    pub fn response(&self) -> &[f64] {
        self.response
    }

    pub fn column(&self, k: usize) -> &[f64] {
        self.columns[k]
    }

    pub fn mean_response(&self) -> f64 {
        self.sum_y / self.n() as f64
    }

    /// Linear predictor for every row.
    pub fn linear_predictor(&self, intercept: f64, coefficients: &[f64]) -> Vec<f64> {
        let mut eta = vec![intercept; self.n()];
        for (c, &b) in self.columns.iter().zip(coefficients) {
            if b != 0.0 {
                for (e, &x) in eta.iter_mut().zip(c.iter()) {
                    *e += b * x;
                }
            }
        }
        eta
    }

    /// Mean negative log-likelihood (without the log y! constant).
    pub fn smooth_loss(&self, eta: &[f64]) -> f64 {
        let s: f64 = eta
            .iter()
            .zip(self.response)
            .map(|(&e, &y)| e.exp() - y * e)
            .sum();
        s / self.n() as f64
    }

    /// Gradient of the smooth loss: intercept first, then one entry per column.
    pub fn gradient(&self, eta: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n() as f64;
        let resid: Vec<f64> = eta.iter().zip(self.response).map(|(&e, &y)| e.exp() - y).collect();
        let g0 = resid.iter().sum::<f64>() / n;
        let g = self
            .columns
            .iter()
            .map(|c| c.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n)
            .collect();
        (g0, g)
    }

    fn kkt(&self, eta: &[f64], coefficients: &[f64], lambda: f64) -> f64 {
        let (g0, g) = self.gradient(eta);
        let mut worst = g0.abs() / self.y_scale;
        for (k, (&gk, &b)) in g.iter().zip(coefficients).enumerate() {
            let pen = scaled_penalty(lambda, self.penalty[k]);
            let v = if b == 0.0 {
                (gk.abs() - pen).max(0.0)
            } else {
                (gk + pen * b.signum()).abs()
            };
            worst = worst.max(v / (self.col_scale[k] * self.y_scale));
        }
        worst
    }
}

fn scaled_penalty(lambda: f64, factor: f64) -> f64 {
    if factor.is_infinite() {
        f64::INFINITY
    } else {
        lambda * factor
    }
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoOptions {
    pub max_outer: usize,
    pub max_inner_sweeps: usize,
    /// Loosest inner tolerance: coordinate descent stops once no coordinate moves
    /// the linear predictor by more than `min(inner_tol, 0.1 · KKT residual)`.
    pub inner_tol: f64,
    /// Relative objective change that counts as a stalled outer step.
    pub outer_rel_tol: f64,
    /// Scaled KKT residual required for success.
    pub kkt_tol: f64,
    /// Linear-predictor clamp inside exp() while building the quadratic model.
    pub eta_clamp: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            max_outer: 200,
            max_inner_sweeps: 2000,
            inner_tol: 1e-3,
            outer_rel_tol: 1e-9,
            kkt_tol: 1e-9,
            eta_clamp: 30.0,
        }
    }
}

/// Solution of one penalized regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// Worst KKT violation, each coordinate divided by `max(1, rms(x_k)) · max(1, rms(y))`.
    pub kkt_residual: f64,
    pub objective: f64,
    /// False for a best-effort iterate recovered from [`LassoError::NonConvergence`].
    #[serde(default = "yes")]
    pub converged: bool,
    /// Objective after every outer step, starting with the initial point.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

fn yes() -> bool {
    true
}

impl LassoFit {
    /// Indices of coefficients with magnitude above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > threshold)
            .map(|(k, _)| k)
            .collect()
    }
}

/// `sign(z) · max(|z| − γ, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest penalty at which every coefficient is zero:
/// `max_k |(1/n) Σ_i x_ik (y_i − ȳ)| / w_k`.
pub fn lambda_max(problem: &LassoProblem) -> f64 {
    let ybar = problem.mean_response();
    let n = problem.n() as f64;
    problem
        .columns
        .iter()
        .zip(&problem.penalty)
        .map(|(c, w)| (c.iter().zip(problem.response).map(|(x, y)| x * (y - ybar)).sum::<f64>() / n).abs() / w)
        .fold(0.0, f64::max)
}

fn penalty_norm(problem: &LassoProblem, coefficients: &[f64]) -> f64 {
    coefficients
        .iter()
        .zip(&problem.penalty)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, w)| w * b.abs())
        .sum()
}

fn objective(problem: &LassoProblem, eta: &[f64], coefficients: &[f64], lambda: f64) -> f64 {
    problem.smooth_loss(eta) + lambda * penalty_norm(problem, coefficients)
}

/// Closed-form intercept shift making Σ exp(η) = Σ y.
fn intercept_shift(problem: &LassoProblem, eta: &[f64]) -> f64 {
    // log-sum-exp for stability
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = eta.iter().map(|&e| (e - m).exp()).sum();
    problem.sum_y.ln() - (m + s.ln())
}

fn intercept_only(problem: &LassoProblem, lambda: f64) -> LassoFit {
    let q = problem.q();
    let intercept = problem.mean_response().ln();
    let coefficients = vec![0.0; q];
    let eta = vec![intercept; problem.n()];
    let obj = objective(problem, &eta, &coefficients, lambda);
    LassoFit {
        intercept,
        kkt_residual: problem.kkt(&eta, &coefficients, lambda),
        coefficients,
        lambda,
        iterations: 0,
        objective: obj,
        converged: true,
        objective_trace: vec![obj],
    }
}

/// Fits at penalty `lambda`, optionally warm-started from `warm`.
pub fn fit_poisson_lasso(
    problem: &LassoProblem,
    lambda: f64,
    options: &LassoOptions,
    warm: Option<&LassoFit>,
) -> Result<LassoFit, LassoError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(LassoError::BadLambda(lambda));
    }
    if problem.sum_y <= 0.0 {
        return Err(LassoError::ZeroResponse);
    }
    if problem.q() == 0 || lambda >= lambda_max(problem) {
        return Ok(intercept_only(problem, lambda));
    }
    let n = problem.n();
    let nf = n as f64;
    let q = problem.q();

    let (mut b0, mut beta) = match warm {
        Some(w) if w.coefficients.len() == q && w.intercept.is_finite() => (w.intercept, w.coefficients.clone()),
        _ => (problem.mean_response().ln(), vec![0.0; q]),
    };
    let mut eta = problem.linear_predictor(b0, &beta);
    let shift = intercept_shift(problem, &eta);
    if shift.is_finite() {
        b0 += shift;
        eta.iter_mut().for_each(|e| *e += shift);
    }
    let mut obj = objective(problem, &eta, &beta, lambda);
    let mut trace = vec![obj];
    if !obj.is_finite() {
        // Warm start landed somewhere explosive; restart cold.
        b0 = problem.mean_response().ln();
        beta.iter_mut().for_each(|b| *b = 0.0);
        eta = vec![b0; n];
        obj = objective(problem, &eta, &beta, lambda);
        trace = vec![obj];
    }

    let mut w = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut new_beta = beta.clone();
    // Covariance-form coordinate descent: per outer step, c_k tracks
    // (1/n) Σ w_i x_ik (r_i − Δη_i) and Gram columns are built for coordinates
    // that move, so a sweep costs O(q) per changed coordinate instead of O(n).
    let mut c = vec![0.0; q];
    let mut xw = vec![0.0; q];
    let mut hkk = vec![0.0; q];
    let mut gram: Vec<Vec<f64>> = vec![Vec::new(); q];
    let mut stalls = 0;
    let mut kkt = problem.kkt(&eta, &beta, lambda);

    for iter in 1..=options.max_outer {
        if kkt <= options.kkt_tol {
            return finish(problem, b0, beta, lambda, iter - 1, kkt, obj, trace, &eta, options);
        }
        // Quadratic model around the current point.
        for i in 0..n {
            let mu = eta[i].clamp(-options.eta_clamp, options.eta_clamp).exp();
            w[i] = mu;
            r[i] = (problem.response[i] - mu) / mu;
        }
        let wbar = w.iter().sum::<f64>() / nf;
        let mut c0 = w.iter().zip(&r).map(|(wi, ri)| wi * ri).sum::<f64>() / nf;
        for k in 0..q {
            let (mut ck, mut xk, mut hk) = (0.0, 0.0, 0.0);
            for ((x, wi), ri) in problem.columns[k].iter().zip(&w).zip(&r) {
                let wx = wi * x;
                ck += wx * ri;
                xk += wx;
                hk += wx * x;
            }
            c[k] = ck / nf;
            xw[k] = xk / nf;
            hkk[k] = hk / nf;
            gram[k].clear();
        }
        new_beta.copy_from_slice(&beta);
        let mut delta0 = 0.0;

        let cd_step = |k: usize, new_beta: &mut [f64], c: &mut [f64], c0: &mut f64, gram: &mut [Vec<f64>]| -> f64 {
            let h = hkk[k];
            if h <= 1e-300 {
                return 0.0;
            }
            let old = new_beta[k];
            let new = soft_threshold(h * old + c[k], scaled_penalty(lambda, problem.penalty[k])) / h;
            let d = new - old;
            if d != 0.0 {
                new_beta[k] = new;
                if gram[k].is_empty() {
                    let col = problem.columns[k];
                    gram[k] = (0..q)
                        .map(|l| {
                            if l == k {
                                h
                            } else {
                                problem.columns[l].iter().zip(col).zip(&w).map(|((a, b), wi)| wi * a * b).sum::<f64>() / nf
                            }
                        })
                        .collect();
                }
                for (cl, g) in c.iter_mut().zip(&gram[k]) {
                    *cl -= g * d;
                }
                *c0 -= xw[k] * d;
            }
            (h / wbar).sqrt() * d.abs()
        };
        let intercept_step = |c: &mut [f64], c0: &mut f64, delta0: &mut f64| -> f64 {
            let d = *c0 / wbar;
            if d != 0.0 {
                *delta0 += d;
                *c0 = 0.0;
                for (cl, x) in c.iter_mut().zip(&xw) {
                    *cl -= x * d;
                }
            }
            d.abs()
        };

        // Tighten the inner solve as the outer iterate approaches optimality.
        let inner_tol = options.inner_tol.min(0.1 * kkt).max(1e-15);
        let mut sweeps = 0;
        loop {
            // Full sweep, then converge on the active set.
            let mut change = intercept_step(&mut c, &mut c0, &mut delta0);
            for k in 0..q {
                change = change.max(cd_step(k, &mut new_beta, &mut c, &mut c0, &mut gram));
            }
            sweeps += 1;
            if change < inner_tol || sweeps >= options.max_inner_sweeps {
                break;
            }
            let active: Vec<usize> = (0..q).filter(|&k| new_beta[k] != 0.0).collect();
            loop {
                let mut change = intercept_step(&mut c, &mut c0, &mut delta0);
                for &k in &active {
                    change = change.max(cd_step(k, &mut new_beta, &mut c, &mut c0, &mut gram));
                }
                sweeps += 1;
                if change < inner_tol || sweeps >= options.max_inner_sweeps {
                    break;
                }
            }
            if sweeps >= options.max_inner_sweeps {
                break;
            }
        }
        // Direction: Δη_i = Δθ₀ + Σ_k Δθ_k x_ik.
        let mut direction = vec![delta0; n];
        for k in 0..q {
            let d = new_beta[k] - beta[k];
            if d != 0.0 {
                for (di, x) in direction.iter_mut().zip(problem.columns[k]) {
                    *di += d * x;
                }
            }
        }
        let l1_old = penalty_norm(problem, &beta);
        let l1_new = penalty_norm(problem, &new_beta);
        let (g0, g) = problem.gradient(&eta);
        let mut descent = g0 * delta0 + lambda * (l1_new - l1_old);
        for k in 0..q {
            descent += g[k] * (new_beta[k] - beta[k]);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial_eta: Vec<f64> = eta.iter().zip(&direction).map(|(&e, &di)| e + t * di).collect();
            let trial_beta: Vec<f64> = beta.iter().zip(&new_beta).map(|(&b, &nb)| b + t * (nb - b)).collect();
            let trial_obj = objective(problem, &trial_eta, &trial_beta, lambda);
            // Allow a few ulps of slack: near the optimum the objective no longer
            // resolves progress that the gradient still shows.
            let slack = 8.0 * f64::EPSILON * obj.abs().max(1.0);
            if trial_obj.is_finite() && trial_obj <= obj + 1e-4 * t * descent.min(0.0) + slack {
                accepted = Some((trial_eta, trial_beta, b0 + t * delta0, trial_obj));
                break;
            }
            t *= 0.5;
        }
        let prev_obj = obj;
        let stepped = accepted.is_some();
        if let Some((e, bt, i0, _)) = accepted {
            eta = e;
            beta = bt;
            b0 = i0;
            // Coordinates that stepped exactly onto zero stay zero; others may be tiny but nonzero.
            let shift = intercept_shift(problem, &eta);
            if shift.is_finite() {
                b0 += shift;
                eta.iter_mut().for_each(|x| *x += shift);
            }
            obj = objective(problem, &eta, &beta, lambda);
        }
        debug_assert!(obj <= prev_obj + 1e-13 * prev_obj.abs().max(1.0), "objective increased: {prev_obj} -> {obj}");
        trace.push(obj);
        kkt = problem.kkt(&eta, &beta, lambda);
        let rel = (prev_obj - obj).abs() / prev_obj.abs().max(1.0);
        if !stepped || rel < options.outer_rel_tol {
            stalls += 1;
            if stalls >= 10 && kkt > options.kkt_tol {
                let last = LassoFit {
                    intercept: b0,
                    coefficients: beta,
                    lambda,
                    iterations: iter,
                    kkt_residual: kkt,
                    objective: obj,
                    converged: false,
                    objective_trace: trace,
                };
                return Err(LassoError::NonConvergence {
                    iterations: iter,
                    kkt_residual: kkt,
                    last: Box::new(last),
                });
            }
        } else {
            stalls = 0;
        }
    }
    if kkt <= options.kkt_tol {
        return finish(problem, b0, beta, lambda, options.max_outer, kkt, obj, trace, &eta, options);
    }
    Err(LassoError::NonConvergence {
        iterations: options.max_outer,
        kkt_residual: kkt,
        last: Box::new(LassoFit {
            intercept: b0,
            coefficients: beta,
            lambda,
            iterations: options.max_outer,
            kkt_residual: kkt,
            objective: obj,
            converged: false,
            objective_trace: trace,
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    _problem: &LassoProblem,
    intercept: f64,
    coefficients: Vec<f64>,
    lambda: f64,
    iterations: usize,
    kkt_residual: f64,
    objective: f64,
    objective_trace: Vec<f64>,
    eta: &[f64],
    options: &LassoOptions,
) -> Result<LassoFit, LassoError> {
    let max_eta = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_eta > options.eta_clamp {
        return Err(LassoError::Divergent { max_eta });
    }
    Ok(LassoFit {
        intercept,
        coefficients,
        lambda,
        iterations,
        kkt_residual,
        objective,
        converged: true,
        objective_trace,
    })
}

/// Descending log-spaced grid from `lambda_max` to `lambda_max · ratio`.
/// A zero `lambda_max` collapses the grid to `[0]`.
pub fn lambda_grid(lambda_max: f64, grid_size: usize, ratio: f64) -> Result<Vec<f64>, LassoError> {
    if grid_size == 0 {
        return Err(LassoError::Grid("grid size must be positive".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(LassoError::Grid(format!("ratio {ratio} must lie in (0, 1)")));
    }
    if lambda_max <= 0.0 {
        return Ok(vec![0.0]);
    }
    if grid_size == 1 {
        return Ok(vec![lambda_max]);
    }
    let step = ratio.ln() / (grid_size - 1) as f64;
    Ok((0..grid_size)
        .map(|i| if i == 0 { lambda_max } else { lambda_max * (step * i as f64).exp() })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<LassoFit>,
}

/// Warm-started fits along the default grid.
pub fn lambda_path(
    problem: &LassoProblem,
    grid_size: usize,
    ratio: f64,
    options: &LassoOptions,
) -> Result<LambdaPath, LassoError> {
    if grid_size < 2 {
        return Err(LassoError::Grid("a path needs at least two penalties".into()));
    }
    let grid = lambda_grid(lambda_max(problem), grid_size, ratio)?;
    path_on_grid(problem, &grid, options)
}

pub fn path_on_grid(problem: &LassoProblem, grid: &[f64], options: &LassoOptions) -> Result<LambdaPath, LassoError> {
    let mut fits: Vec<LassoFit> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let fit = fit_poisson_lasso(problem, lambda, options, fits.last())?;
        fits.push(fit);
    }
    Ok(LambdaPath {
        lambdas: grid.to_vec(),
        fits,
    })
}

/// Like [`path_on_grid`], but keeps the last iterate of a fit that fails to
/// converge (marked `converged: false`) instead of aborting the path.
pub fn path_on_grid_lenient(
    problem: &LassoProblem,
    grid: &[f64],
    options: &LassoOptions,
) -> Result<LambdaPath, LassoError> {
    let mut fits: Vec<LassoFit> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let fit = match fit_poisson_lasso(problem, lambda, options, fits.last()) {
            Ok(fit) => fit,
            Err(LassoError::NonConvergence { last, .. }) => *last,
            Err(e) => return Err(e),
        };
        fits.push(fit);
    }
    Ok(LambdaPath {
        lambdas: grid.to_vec(),
        fits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvLoss {
    /// Held-out Poisson deviance per observation.
    Deviance,
    /// Held-out mean squared error of the fitted mean.
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvOptions {
    pub folds: usize,
    pub grid_size: usize,
    pub ratio: f64,
    /// Width of the band around the minimum, in standard errors.
    pub se_multiplier: f64,
    pub loss: CvLoss,
    pub seed: u64,
    /// Width for parallel fold fits (1 = sequential).
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            grid_size: 50,
            ratio: 1e-3,
            se_multiplier: 2.0,
            loss: CvLoss::Deviance,
            seed: 0,
            jobs: 1,
        }
    }
}

/// Cross-validation table plus the full-data fits along the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    pub mean_loss: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub index_min: usize,
    /// Smallest penalty whose loss is within the band.
    pub index_band_lo: usize,
    /// Largest penalty whose loss is within the band.
    pub index_band_hi: usize,
    pub lambda_min: f64,
    pub lambda_band_lo: f64,
    pub lambda_band_hi: f64,
    /// Fits (full data and folds) that stalled before meeting the KKT tolerance.
    pub unconverged: usize,
    #[serde(skip)]
    pub fits: Vec<LassoFit>,
}

impl CvResult {
    pub fn fit_at(&self, index: usize) -> &LassoFit {
        &self.fits[index]
    }
}

fn held_out_loss(loss: CvLoss, y: &[f64], eta: &[f64]) -> f64 {
    let n = y.len() as f64;
    let total: f64 = match loss {
        CvLoss::Deviance => y
            .iter()
            .zip(eta)
            .map(|(&yi, &e)| {
                let mu = e.exp();
                if yi > 0.0 {
                    2.0 * (yi * (yi.ln() - e) - (yi - mu))
                } else {
                    2.0 * mu
                }
            })
            .sum(),
        CvLoss::SquaredError => y.iter().zip(eta).map(|(&yi, &e)| (yi - e.exp()).powi(2)).sum(),
    };
    total / n
}

fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(seed));
    let mut fold = vec![0; n];
    for (rank, &i) in perm.iter().enumerate() {
        fold[i] = rank % folds;
    }
    fold
}

/// K-fold cross-validation over a descending grid, selecting the minimizer and
/// the band of penalties whose mean loss lies within `se_multiplier` standard
/// errors of the minimum. Fits that stall short of the KKT tolerance are kept
/// as best-effort iterates and counted in `unconverged`.
pub fn cv_select(problem: &LassoProblem, options: &CvOptions, lasso: &LassoOptions) -> Result<CvResult, LassoError> {
    let n = problem.n();
    if options.folds < 2 || options.folds > n {
        return Err(LassoError::Folds { folds: options.folds, n });
    }
    let grid = lambda_grid(lambda_max(problem), options.grid_size, options.ratio)?;
    let full = path_on_grid_lenient(problem, &grid, lasso)?;

    let mut assignment = None;
    for attempt in 0..10u64 {
        let fold = fold_assignment(n, options.folds, options.seed.wrapping_add(attempt));
        let mut train_sum = vec![problem.sum_y; options.folds];
        for (i, &f) in fold.iter().enumerate() {
            train_sum[f] -= problem.response[i];
        }
        if train_sum.iter().all(|&s| s > 0.0) {
            assignment = Some(fold);
            break;
        }
    }
    let fold = assignment.ok_or(LassoError::DegenerateFold)?;

    let per_fold: Vec<Result<(Vec<f64>, usize), LassoError>> = par::map_indexed(options.folds, options.jobs, |f| {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
        let cols: Vec<Vec<f64>> = problem
            .columns
            .iter()
            .map(|c| train.iter().map(|&i| c[i]).collect())
            .collect();
        let y: Vec<f64> = train.iter().map(|&i| problem.response[i]).collect();
        let sub = LassoProblem::new(cols.iter().map(Vec::as_slice).collect(), &y)?.with_penalty_factors(problem.penalty.clone())?;
        let path = path_on_grid_lenient(&sub, &grid, lasso)?;
        let y_test: Vec<f64> = test.iter().map(|&i| problem.response[i]).collect();
        let stalled = path.fits.iter().filter(|f| !f.converged).count();
        let losses = path
            .fits
            .iter()
            .map(|fit| {
                let eta: Vec<f64> = test
                    .iter()
                    .map(|&i| {
                        fit.intercept
                            + problem
                                .columns
                                .iter()
                                .zip(&fit.coefficients)
                                .map(|(c, b)| b * c[i])
                                .sum::<f64>()
                    })
                    .collect();
                held_out_loss(options.loss, &y_test, &eta)
            })
            .collect();
        Ok((losses, stalled))
    });
    let per_fold: Vec<(Vec<f64>, usize)> = per_fold.into_iter().collect::<Result<_, _>>()?;
    let unconverged = full.fits.iter().filter(|f| !f.converged).count() + per_fold.iter().map(|p| p.1).sum::<usize>();
    let per_fold: Vec<Vec<f64>> = per_fold.into_iter().map(|p| p.0).collect();

    let k = options.folds as f64;
    let m = grid.len();
    let mut mean_loss = vec![0.0; m];
    let mut standard_error = vec![0.0; m];
    for l in 0..m {
        let vals: Vec<f64> = per_fold.iter().map(|v| v[l]).collect();
        let mean = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        mean_loss[l] = mean;
        standard_error[l] = (var / k).sqrt();
    }
    let index_min = (0..m).fold(0, |best, l| if mean_loss[l] < mean_loss[best] { l } else { best });
    let bound = mean_loss[index_min] + options.se_multiplier * standard_error[index_min];
    let within: Vec<usize> = (0..m).filter(|&l| mean_loss[l] <= bound).collect();
    // grid is descending: first in-band index has the largest penalty
    let index_band_hi = *within.first().unwrap_or(&index_min);
    let index_band_lo = *within.last().unwrap_or(&index_min);
    Ok(CvResult {
        lambda_min: grid[index_min],
        lambda_band_lo: grid[index_band_lo],
        lambda_band_hi: grid[index_band_hi],
        lambdas: grid,
        mean_loss,
        standard_error,
        index_min,
        index_band_lo,
        index_band_hi,
        unconverged,
        fits: full.fits,
    })
}

//! ARMA(m,n)-GARCH(p,q) marginal models with skewed Student-t innovations.
//!
//! The mean recursion is
//! `r_t = phi0 + sum_j phi_j r_{t-j} + eps_t + sum_j gamma_j eps_{t-j}`
//! and the variance recursion is
//! `sigma^2_t = alpha0 + sum_j alpha_j eps^2_{t-j} + sum_j beta_j sigma^2_{t-j}`,
//! with `z_t = eps_t / sigma_t` i.i.d. skewed Student-t.
//!
//! Initialization convention: presample returns are set to the sample mean,
//! presample shocks to zero, and presample variances to the (population)
//! sample variance of the series.
//!
//! Estimation is derivative-free: Nelder-Mead over a smooth
//! reparameterization (`alpha0 = exp(s)`, ARCH/GARCH coefficients as a
//! logistic-scaled simplex `lambda * softmax`, `eta = tanh(s)`,
//! `nu = 2 + exp(s)`) from five deterministic starts around a moment-based
//! initial guess. Standard errors come from a central finite-difference
//! Hessian in the natural parameters.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{SkewT, SkewTParams};
use crate::numeric::hessian;
use crate::numeric::optim::{nelder_mead, NmOptions};
use crate::timeseries::{self, ReturnSeries, TsError};

#[derive(Debug, Error)]
pub enum MarginalError {
    #[error("invalid marginal parameters: {0}")]
    InvalidParams(String),
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("no optimizer start converged")]
    OptimizerFailed,
    #[error("no lag-order combination produced a converged fit")]
    AllFitsFailed,
    #[error(transparent)]
    Diagnostics(#[from] TsError),
}

/// ARMA/GARCH lag orders, each in `[0, 3]` with `p + q >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaGarchOrders {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

impl ArmaGarchOrders {
    pub fn new(m: usize, n: usize, p: usize, q: usize) -> Result<Self, MarginalError> {
        let orders = Self { m, n, p, q };
        orders.validate()?;
        Ok(orders)
    }

    pub fn validate(&self) -> Result<(), MarginalError> {
        if self.m > 3 || self.n > 3 || self.p > 3 || self.q > 3 {
            return Err(MarginalError::InvalidParams(format!(
                "lag orders must lie in [0, 3], got ({}, {}, {}, {})",
                self.m, self.n, self.p, self.q
            )));
        }
        if self.p + self.q == 0 {
            return Err(MarginalError::InvalidParams(
                "variance equation needs p + q >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn max_lag(&self) -> usize {
        self.m.max(self.n).max(self.p).max(self.q)
    }

    /// Free parameters including the two innovation-shape parameters.
    pub fn param_count(&self) -> usize {
        1 + self.m + self.n + 1 + self.p + self.q + 2
    }
}

/// Full parameter set of one marginal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalParams {
    pub phi0: f64,
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha0: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub skewt: SkewTParams,
}

impl MarginalParams {
    pub fn validate(&self, orders: &ArmaGarchOrders) -> Result<(), MarginalError> {
        orders.validate()?;
        if self.phi.len() != orders.m
            || self.gamma.len() != orders.n
            || self.alpha.len() != orders.p
            || self.beta.len() != orders.q
        {
            return Err(MarginalError::InvalidParams(
                "coefficient vector lengths do not match the lag orders".into(),
            ));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(MarginalError::InvalidParams(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if self.alpha.iter().chain(&self.beta).any(|c| *c < 0.0) {
            return Err(MarginalError::InvalidParams(
                "ARCH/GARCH coefficients must be non-negative".into(),
            ));
        }
        let persistence: f64 = self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>();
        if !(persistence < 1.0) {
            return Err(MarginalError::InvalidParams(format!(
                "covariance stationarity requires sum(alpha) + sum(beta) < 1, got {persistence}"
            )));
        }
        if !ar_stationary(&self.phi) {
            return Err(MarginalError::InvalidParams(
                "AR polynomial has a root inside the unit circle".into(),
            ));
        }
        self.skewt
            .validate()
            .map_err(|e| MarginalError::InvalidParams(e.to_string()))?;
        Ok(())
    }

    /// Natural parameter vector:
    /// `[phi0, phi.., gamma.., alpha0, alpha.., beta.., nu, eta]`.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(
            4 + self.phi.len() + self.gamma.len() + self.alpha.len() + self.beta.len(),
        );
        v.push(self.phi0);
        v.extend_from_slice(&self.phi);
        v.extend_from_slice(&self.gamma);
        v.push(self.alpha0);
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        v.push(self.skewt.nu);
        v.push(self.skewt.eta);
        v
    }

    fn from_flat(orders: &ArmaGarchOrders, flat: &[f64]) -> Self {
        let (m, n, p, q) = (orders.m, orders.n, orders.p, orders.q);
        let phi0 = flat[0];
        let mut at = 1usize;
        let phi = flat[at..at + m].to_vec();
        at += m;
        let gamma = flat[at..at + n].to_vec();
        at += n;
        let alpha0 = flat[at];
        at += 1;
        let alpha = flat[at..at + p].to_vec();
        at += p;
        let beta = flat[at..at + q].to_vec();
        at += q;
        let nu = flat[at];
        let eta = flat[at + 1];
        Self {
            phi0,
            phi,
            gamma,
            alpha0,
            alpha,
            beta,
            skewt: SkewTParams { nu, eta },
        }
    }

    /// Names matching [`MarginalParams::flat`], for reports.
    pub fn flat_names(orders: &ArmaGarchOrders) -> Vec<String> {
        let mut names = vec!["phi0".to_string()];
        names.extend((1..=orders.m).map(|j| format!("phi{j}")));
        names.extend((1..=orders.n).map(|j| format!("gamma{j}")));
        names.push("alpha0".to_string());
        names.extend((1..=orders.p).map(|j| format!("alpha{j}")));
        names.extend((1..=orders.q).map(|j| format!("beta{j}")));
        names.push("nu".to_string());
        names.push("eta".to_string());
        names
    }
}

/// AR stationarity via companion-matrix eigenvalues strictly inside the
/// unit circle.
fn ar_stationary(phi: &[f64]) -> bool {
    let m = phi.len();
    if m == 0 {
        return true;
    }
    if phi.iter().any(|c| !c.is_finite()) {
        return false;
    }
    let mut companion = DMatrix::zeros(m, m);
    for (j, &c) in phi.iter().enumerate() {
        companion[(0, j)] = c;
    }
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .all(|l| l.norm() < 1.0 - 1e-10)
}

/// Filtered conditional moments and standardized residuals.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
}

const MIN_FIT_LEN: usize = 100;

fn check_filter_len(orders: &ArmaGarchOrders, len: usize) -> Result<(), MarginalError> {
    let needed = orders.max_lag() + 11;
    if len < needed {
        return Err(MarginalError::TooShort { needed, got: len });
    }
    Ok(())
}

/// Runs the mean and variance recursions over `returns`.
pub fn filter(
    params: &MarginalParams,
    orders: &ArmaGarchOrders,
    returns: &[f64],
) -> Result<FilterOutput, MarginalError> {
    params.validate(orders)?;
    check_filter_len(orders, returns.len())?;
    Ok(filter_unchecked(params, orders, returns))
}

fn filter_unchecked(
    params: &MarginalParams,
    orders: &ArmaGarchOrders,
    returns: &[f64],
) -> FilterOutput {
    let _ = orders;
    let t_len = returns.len();
    let nf = t_len as f64;
    let sample_mean = returns.iter().sum::<f64>() / nf;
    let sample_var = returns
        .iter()
        .map(|r| (r - sample_mean).powi(2))
        .sum::<f64>()
        / nf;

    let mut mu = vec![0.0; t_len];
    let mut sigma = vec![0.0; t_len];
    let mut z = vec![0.0; t_len];
    let mut eps = vec![0.0; t_len];
    let mut sigma2 = vec![0.0; t_len];

    for t in 0..t_len {
        let mut m_t = params.phi0;
        for (j, &phi_j) in params.phi.iter().enumerate() {
            let lag = j + 1;
            m_t += phi_j * if t >= lag { returns[t - lag] } else { sample_mean };
        }
        for (j, &gamma_j) in params.gamma.iter().enumerate() {
            let lag = j + 1;
            m_t += gamma_j * if t >= lag { eps[t - lag] } else { 0.0 };
        }
        let mut s2_t = params.alpha0;
        for (j, &alpha_j) in params.alpha.iter().enumerate() {
            let lag = j + 1;
            s2_t += alpha_j * if t >= lag { eps[t - lag] * eps[t - lag] } else { 0.0 };
        }
        for (j, &beta_j) in params.beta.iter().enumerate() {
            let lag = j + 1;
            s2_t += beta_j * if t >= lag { sigma2[t - lag] } else { sample_var };
        }
        mu[t] = m_t;
        sigma2[t] = s2_t;
        sigma[t] = s2_t.sqrt();
        eps[t] = returns[t] - m_t;
        z[t] = eps[t] / sigma[t];
    }
    FilterOutput { mu, sigma, z }
}

/// Negative log-likelihood `-sum_t [ln f(z_t) - ln sigma_t]`.
pub fn nll(
    params: &MarginalParams,
    orders: &ArmaGarchOrders,
    returns: &[f64],
) -> Result<f64, MarginalError> {
    params.validate(orders)?;
    check_filter_len(orders, returns.len())?;
    let skewt =
        SkewT::new(params.skewt).map_err(|e| MarginalError::InvalidParams(e.to_string()))?;
    Ok(nll_unchecked(params, orders, returns, &skewt))
}

fn nll_unchecked(
    params: &MarginalParams,
    orders: &ArmaGarchOrders,
    returns: &[f64],
    skewt: &SkewT,
) -> f64 {
    let out = filter_unchecked(params, orders, returns);
    let mut acc = 0.0;
    for (z_t, s_t) in out.z.iter().zip(&out.sigma) {
        acc += skewt.ln_pdf(*z_t) - s_t.ln();
    }
    -acc
}

/// A fitted marginal model with per-date conditional moments, standardized
/// residuals, and PIT uniforms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalFit {
    pub instrument_id: String,
    pub orders: ArmaGarchOrders,
    pub params: MarginalParams,
    /// Standard errors in [`MarginalParams::flat`] order; `None` where the
    /// numeric Hessian is singular.
    pub std_errors: Vec<Option<f64>>,
    pub dates: Vec<NaiveDate>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    /// Set when any estimate sits within 1e-4 of a constraint boundary.
    pub boundary: bool,
}

/// Optimizer budget profile for marginal fits.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_evals_per_dim: usize,
    pub tol_f: f64,
}

impl FitOptions {
    /// Full-budget profile used for standalone fits.
    pub fn thorough() -> Self {
        Self {
            max_evals_per_dim: 500,
            tol_f: 1e-9,
        }
    }

    /// Reduced budget for the lag-order grid search.
    pub fn quick() -> Self {
        Self {
            max_evals_per_dim: 150,
            tol_f: 1e-7,
        }
    }

    fn nm(&self, dim: usize) -> NmOptions {
        NmOptions {
            max_evals: self.max_evals_per_dim * dim.max(1),
            tol_f: self.tol_f,
            tol_x: 1e-9,
        }
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        Self::thorough()
    }
}

// --- reparameterization -----------------------------------------------------
//
// Raw vector layout: [phi0, phi.., gamma.., ln(alpha0), s_lambda,
// s_frac[p+q], s_nu, s_eta], where the ARCH/GARCH block is
// lambda * softmax(s_frac) with lambda = logistic(s_lambda).

fn raw_dim(orders: &ArmaGarchOrders) -> usize {
    1 + orders.m + orders.n + 2 + (orders.p + orders.q) + 2
}

fn params_from_raw(orders: &ArmaGarchOrders, raw: &[f64]) -> MarginalParams {
    let (m, n, p, q) = (orders.m, orders.n, orders.p, orders.q);
    let phi0 = raw[0];
    let mut at = 1usize;
    let phi = raw[at..at + m].to_vec();
    at += m;
    let gamma = raw[at..at + n].to_vec();
    at += n;
    let alpha0 = raw[at].exp();
    at += 1;
    let lambda = 1.0 / (1.0 + (-raw[at]).exp());
    at += 1;
    let fracs = softmax(&raw[at..at + p + q]);
    at += p + q;
    let alpha: Vec<f64> = fracs[..p].iter().map(|f| lambda * f).collect();
    let beta: Vec<f64> = fracs[p..].iter().map(|f| lambda * f).collect();
    let nu = 2.0 + raw[at].exp();
    let eta = raw[at + 1].tanh();
    MarginalParams {
        phi0,
        phi,
        gamma,
        alpha0,
        alpha,
        beta,
        skewt: SkewTParams { nu, eta },
    }
}

fn raw_from_params(orders: &ArmaGarchOrders, params: &MarginalParams) -> Vec<f64> {
    let mut raw = Vec::with_capacity(raw_dim(orders));
    raw.push(params.phi0);
    raw.extend_from_slice(&params.phi);
    raw.extend_from_slice(&params.gamma);
    raw.push(params.alpha0.max(1e-12).ln());
    let lambda = (params.alpha.iter().sum::<f64>() + params.beta.iter().sum::<f64>())
        .clamp(1e-8, 1.0 - 1e-8);
    raw.push((lambda / (1.0 - lambda)).ln());
    for c in params.alpha.iter().chain(&params.beta) {
        raw.push((c / lambda).max(1e-12).ln());
    }
    raw.push((params.skewt.nu - 2.0).max(1e-12).ln());
    raw.push(params.skewt.eta.clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh());
    raw
}

fn softmax(s: &[f64]) -> Vec<f64> {
    if s.is_empty() {
        return Vec::new();
    }
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn raw_nll(orders: &ArmaGarchOrders, raw: &[f64], returns: &[f64]) -> f64 {
    let params = params_from_raw(orders, raw);
    if params.validate(orders).is_err() {
        return f64::INFINITY;
    }
    match SkewT::new(params.skewt) {
        Ok(skewt) => nll_unchecked(&params, orders, returns, &skewt),
        Err(_) => f64::INFINITY,
    }
}

/// Moment-based initial guess: AR coefficients from least squares on the
/// demeaned series, `alpha1 = 0.05 / beta1 = 0.90` persistence split,
/// `nu = 8`, `eta = 0`.
fn initial_guess(orders: &ArmaGarchOrders, returns: &[f64]) -> MarginalParams {
    let nf = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / nf;
    let var = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / nf).max(1e-8);

    let phi = if orders.m > 0 {
        ols_ar(returns, mean, orders.m)
    } else {
        Vec::new()
    };
    let phi = if ar_stationary(&phi) {
        phi
    } else {
        vec![0.0; orders.m]
    };
    let phi_sum: f64 = phi.iter().sum();
    let (lambda, arch_share) = if orders.p == 0 {
        (0.90, 0.0)
    } else if orders.q == 0 {
        (0.45, 1.0)
    } else {
        (0.95, 0.05 / 0.95)
    };
    let alpha: Vec<f64> = (0..orders.p)
        .map(|_| lambda * arch_share / orders.p.max(1) as f64)
        .collect();
    let beta: Vec<f64> = (0..orders.q)
        .map(|_| lambda * (1.0 - arch_share) / orders.q.max(1) as f64)
        .collect();
    MarginalParams {
        phi0: mean * (1.0 - phi_sum),
        phi,
        gamma: vec![0.0; orders.n],
        alpha0: var * (1.0 - lambda),
        alpha,
        beta,
        skewt: SkewTParams { nu: 8.0, eta: 0.0 },
    }
}

/// Least-squares AR(m) on the demeaned series.
fn ols_ar(returns: &[f64], mean: f64, m: usize) -> Vec<f64> {
    let x: Vec<f64> = returns.iter().map(|r| r - mean).collect();
    let rows = x.len() - m;
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = nalgebra::DVector::zeros(m);
    for t in 0..rows {
        for i in 0..m {
            rhs[i] += x[t + m] * x[t + m - 1 - i];
            for j in 0..m {
                gram[(i, j)] += x[t + m - 1 - i] * x[t + m - 1 - j];
            }
        }
    }
    match gram.lu().solve(&rhs) {
        Some(sol) => sol.iter().cloned().collect(),
        None => vec![0.0; m],
    }
}

/// The five deterministic multi-start points.
fn starts(orders: &ArmaGarchOrders, base: &MarginalParams) -> Vec<Vec<f64>> {
    let raw0 = raw_from_params(orders, base);
    let mut out = vec![raw0];

    let perturb = |tweak: &dyn Fn(&mut MarginalParams)| {
        let mut p = base.clone();
        tweak(&mut p);
        raw_from_params(orders, &p)
    };
    // Higher-ARCH persistence split.
    out.push(perturb(&|p: &mut MarginalParams| {
        if !p.alpha.is_empty() && !p.beta.is_empty() {
            let lam: f64 = p.alpha.iter().chain(p.beta.iter()).sum();
            let k_a = p.alpha.len() as f64;
            let k_b = p.beta.len() as f64;
            p.alpha.iter_mut().for_each(|a| *a = 0.3 * lam / k_a);
            p.beta.iter_mut().for_each(|b| *b = 0.7 * lam / k_b);
        } else {
            p.alpha0 *= 4.0;
        }
    }));
    // Heavy-tailed, left-skewed innovations.
    out.push(perturb(&|p: &mut MarginalParams| {
        p.skewt = SkewTParams { nu: 4.0, eta: -0.2 };
    }));
    // No mean dynamics.
    out.push(perturb(&|p: &mut MarginalParams| {
        p.phi.iter_mut().for_each(|c| *c = 0.0);
        p.gamma.iter_mut().for_each(|c| *c = 0.0);
    }));
    // Low persistence, light tails, right skew.
    out.push(perturb(&|p: &mut MarginalParams| {
        let scale =
            0.3 / (p.alpha.iter().sum::<f64>() + p.beta.iter().sum::<f64>()).max(1e-6);
        p.alpha.iter_mut().for_each(|a| *a *= scale);
        p.beta.iter_mut().for_each(|b| *b *= scale);
        p.alpha0 *= 2.0;
        p.skewt = SkewTParams { nu: 20.0, eta: 0.2 };
    }));
    out
}

fn boundary_flag(params: &MarginalParams) -> bool {
    let persistence: f64 = params.alpha.iter().sum::<f64>() + params.beta.iter().sum::<f64>();
    1.0 - persistence < 1e-4
        || params.alpha0 < 1e-8
        || params.skewt.nu - 2.0 < 1e-4
        || 1.0 - params.skewt.eta.abs() < 1e-4
}

/// Maximum-likelihood fit at fixed lag orders with the default
/// (full-budget) optimizer profile.
pub fn fit(returns: &ReturnSeries, orders: &ArmaGarchOrders) -> Result<MarginalFit, MarginalError> {
    fit_with_options(returns, orders, &FitOptions::default(), None)
}

/// [`fit`] with an explicit budget profile and an optional extra start
/// (used to seed refinement from a previous solution).
pub fn fit_with_options(
    returns: &ReturnSeries,
    orders: &ArmaGarchOrders,
    options: &FitOptions,
    extra_start: Option<&MarginalParams>,
) -> Result<MarginalFit, MarginalError> {
    orders.validate()?;
    let values = returns.values();
    if values.len() < MIN_FIT_LEN {
        return Err(MarginalError::TooShort {
            needed: MIN_FIT_LEN,
            got: values.len(),
        });
    }

    let base = initial_guess(orders, &values);
    let mut start_points = starts(orders, &base);
    if let Some(extra) = extra_start {
        start_points.push(raw_from_params(orders, extra));
    }

    let dim = raw_dim(orders);
    let nm_opts = options.nm(dim);
    let step: Vec<f64> = vec![0.2; dim];

    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for start in &start_points {
        let result = nelder_mead(|raw| raw_nll(orders, raw, &values), start, &step, &nm_opts);
        if !result.fval.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(fv, _, _)| result.fval < *fv) {
            best = Some((result.fval, result.x.clone(), result.converged));
        }
    }
    let (fval, raw, converged) = best.ok_or(MarginalError::OptimizerFailed)?;
    if !converged {
        return Err(MarginalError::OptimizerFailed);
    }

    let params = params_from_raw(orders, &raw);
    params.validate(orders)?;
    let out = filter_unchecked(&params, orders, &values);
    let u = pit(&out.z);
    let loglik = -fval;
    let k = orders.param_count() as f64;
    let aic = 2.0 * k - 2.0 * loglik;

    // Central finite-difference Hessian of the nll in natural parameters.
    let natural = params.flat();
    let hess = hessian::central_hessian(
        |flat: &[f64]| {
            let candidate = MarginalParams::from_flat(orders, flat);
            if candidate.validate(orders).is_err() {
                return f64::INFINITY;
            }
            match SkewT::new(candidate.skewt) {
                Ok(d) => nll_unchecked(&candidate, orders, &values, &d),
                Err(_) => f64::INFINITY,
            }
        },
        &natural,
        1e-4,
    );
    let std_errors = hessian::std_errors_from_hessian(&hess);

    Ok(MarginalFit {
        instrument_id: returns.instrument_id.clone(),
        orders: *orders,
        boundary: boundary_flag(&params),
        params,
        std_errors,
        dates: returns.dates().collect(),
        mu: out.mu,
        sigma: out.sigma,
        z: out.z,
        u,
        loglik,
        aic,
    })
}

/// Fits every `(m, n, p, q)` in `[0, max_lag]^4` with `p + q >= 1` and
/// returns the minimum-AIC fit; ties break toward fewer parameters, then
/// lexicographic order. Combinations whose optimization fails are skipped.
pub fn select_orders(returns: &ReturnSeries, max_lag: usize) -> Result<MarginalFit, MarginalError> {
    select_orders_with_options(returns, max_lag, &FitOptions::quick())
}

/// [`select_orders`] with an explicit budget for the grid pass. The winner
/// is refined at full budget, seeded from its grid solution; the refit is
/// kept only when it improves the likelihood, so the argmin contract holds.
pub fn select_orders_with_options(
    returns: &ReturnSeries,
    max_lag: usize,
    grid_options: &FitOptions,
) -> Result<MarginalFit, MarginalError> {
    let lag_range = 0..=max_lag.min(3);
    let mut grid = Vec::new();
    for m in lag_range.clone() {
        for n in lag_range.clone() {
            for p in lag_range.clone() {
                for q in lag_range.clone() {
                    if p + q >= 1 {
                        grid.push(ArmaGarchOrders { m, n, p, q });
                    }
                }
            }
        }
    }

    let fits: Vec<Option<MarginalFit>> = grid
        .par_iter()
        .map(|orders| fit_with_options(returns, orders, grid_options, None).ok())
        .collect();

    let mut best: Option<MarginalFit> = None;
    for fit in fits.into_iter().flatten() {
        let replace = match &best {
            None => true,
            Some(b) => {
                fit.aic < b.aic
                    || (fit.aic == b.aic && fit.orders.param_count() < b.orders.param_count())
            }
        };
        if replace {
            best = Some(fit);
        }
    }
    let winner = best.ok_or(MarginalError::AllFitsFailed)?;

    match fit_with_options(
        returns,
        &winner.orders,
        &FitOptions::thorough(),
        Some(&winner.params),
    ) {
        Ok(refined) if refined.loglik >= winner.loglik => Ok(refined),
        _ => Ok(winner),
    }
}

/// Probability-integral transform via the rescaled empirical CDF:
/// `u_j = rank(z_j) / (T + 1)` with average ranks for ties.
pub fn pit(z: &[f64]) -> Vec<f64> {
    let t_len = z.len();
    if t_len == 0 {
        return Vec::new();
    }
    timeseries::average_ranks(z)
        .into_iter()
        .map(|r| r / (t_len as f64 + 1.0))
        .collect()
}

/// Ljung-Box and ARCH-LM diagnostics on the standardized residuals.
///
/// Q statistics adjust the chi-squared degrees of freedom by the fitted
/// ARMA parameter count (`m + n`); the squared-residual statistics adjust
/// by the fitted GARCH parameter count (`p + q`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub q15: (f64, f64),
    pub q20: (f64, f64),
    pub q2_15: (f64, f64),
    pub q2_20: (f64, f64),
    pub arch_lm_15: (f64, f64),
    pub arch_lm_20: (f64, f64),
}

pub fn residual_diagnostics(fit: &MarginalFit) -> Result<ResidualDiagnostics, MarginalError> {
    let z = &fit.z;
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let mean_params = fit.orders.m + fit.orders.n;
    let var_params = fit.orders.p + fit.orders.q;
    Ok(ResidualDiagnostics {
        q15: timeseries::ljung_box(z, 15, mean_params)?,
        q20: timeseries::ljung_box(z, 20, mean_params)?,
        q2_15: timeseries::ljung_box(&z2, 15, var_params)?,
        q2_20: timeseries::ljung_box(&z2, 20, var_params)?,
        arch_lm_15: timeseries::arch_lm(z, 15)?,
        arch_lm_20: timeseries::arch_lm(z, 20)?,
    })
}

/// Runs the ARMA-GARCH recursions forward with the given standardized
/// innovations, returning a synthetic return path of the same length.
///
/// Initialization: unconditional mean and variance; callers wanting a
/// stationary-looking sample should prepend burn-in innovations and slice.
pub fn simulate_returns(
    params: &MarginalParams,
    orders: &ArmaGarchOrders,
    innovations: &[f64],
) -> Result<Vec<f64>, MarginalError> {
    params.validate(orders)?;
    let t_len = innovations.len();
    let phi_sum: f64 = params.phi.iter().sum();
    let uncond_mean = params.phi0 / (1.0 - phi_sum);
    let persistence: f64 = params.alpha.iter().sum::<f64>() + params.beta.iter().sum::<f64>();
    let uncond_var = params.alpha0 / (1.0 - persistence);

    let mut r = vec![0.0; t_len];
    let mut eps = vec![0.0; t_len];
    let mut sigma2 = vec![0.0; t_len];
    for t in 0..t_len {
        let mut s2_t = params.alpha0;
        for (j, &alpha_j) in params.alpha.iter().enumerate() {
            let lag = j + 1;
            s2_t += alpha_j * if t >= lag { eps[t - lag] * eps[t - lag] } else { uncond_var };
        }
        for (j, &beta_j) in params.beta.iter().enumerate() {
            let lag = j + 1;
            s2_t += beta_j * if t >= lag { sigma2[t - lag] } else { uncond_var };
        }
        sigma2[t] = s2_t;
        eps[t] = s2_t.sqrt() * innovations[t];
        let mut m_t = params.phi0;
        for (j, &phi_j) in params.phi.iter().enumerate() {
            let lag = j + 1;
            m_t += phi_j * if t >= lag { r[t - lag] } else { uncond_mean };
        }
        for (j, &gamma_j) in params.gamma.iter().enumerate() {
            let lag = j + 1;
            m_t += gamma_j * if t >= lag { eps[t - lag] } else { 0.0 };
        }
        r[t] = m_t + eps[t];
    }
    Ok(r)
}

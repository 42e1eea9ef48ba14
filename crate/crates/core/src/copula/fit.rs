//! Copula maximum-likelihood estimation and AIC-based family selection.
//!
//! All fits run an unconstrained Nelder-Mead over smooth reparameterizations
//! of the family domains: `rho = tanh(s)`, Clayton `alpha = exp(s)`, Gumbel
//! `alpha = 1 + exp(s)`, Student-t `nu = 2 + exp(s)` capped at 100 (beyond
//! that the family is numerically Normal and the Normal candidate covers
//! it), and mixture weight `w1 = logistic(s)`. Standard errors come from a
//! central finite-difference Hessian in the natural parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CopulaError, CopulaFamily, CopulaModel, CopulaSpec, MixedCopulaSpec, TailDependence};
use crate::numeric::hessian;
use crate::numeric::optim::{nelder_mead, NmOptions, NmResult};

/// Student-t copula degrees-of-freedom cap during fitting.
const NU_CAP: f64 = 100.0;

/// A fitted copula with its fit metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaFit {
    pub model: CopulaModel,
    pub loglik: f64,
    pub aic: f64,
    pub tail: TailDependence,
    pub kendall_tau: f64,
    /// Standard errors in the order of [`CopulaModel::params`]; `None` when
    /// the numeric Hessian is singular.
    pub std_errors: Vec<Option<f64>>,
    /// Set when any estimate sits at its domain boundary.
    pub boundary: bool,
}

impl CopulaFit {
    pub fn param_count(&self) -> usize {
        self.model.param_count()
    }
}

/// One entry of the candidate set handed to [`select_copula`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSpec {
    Single { family: CopulaFamily },
    Mixed {
        upper: CopulaFamily,
        lower: CopulaFamily,
    },
}

impl CandidateSpec {
    /// The ten-candidate default: six single families plus the four
    /// upper/lower mixture combinations.
    pub fn default_set() -> Vec<CandidateSpec> {
        use CopulaFamily::*;
        vec![
            CandidateSpec::Single { family: Normal },
            CandidateSpec::Single { family: StudentT },
            CandidateSpec::Single { family: Clayton },
            CandidateSpec::Single { family: SurvClayton },
            CandidateSpec::Single { family: Gumbel },
            CandidateSpec::Single { family: SurvGumbel },
            CandidateSpec::Mixed {
                upper: Gumbel,
                lower: SurvGumbel,
            },
            CandidateSpec::Mixed {
                upper: SurvClayton,
                lower: Clayton,
            },
            CandidateSpec::Mixed {
                upper: Gumbel,
                lower: Clayton,
            },
            CandidateSpec::Mixed {
                upper: SurvClayton,
                lower: SurvGumbel,
            },
        ]
    }

    pub fn describe(&self) -> String {
        match self {
            CandidateSpec::Single { family } => family.name().to_string(),
            CandidateSpec::Mixed { upper, lower } => {
                format!("mixture({} + {})", upper.name(), lower.name())
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            CandidateSpec::Single { family } => family.param_count(),
            CandidateSpec::Mixed { .. } => 3,
        }
    }
}

/// Fit result (or failure reason) for one candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub spec: CandidateSpec,
    pub fit: Option<CopulaFit>,
    pub error: Option<String>,
}

/// The minimum-AIC fit together with every candidate outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaSelection {
    pub best: CopulaFit,
    pub candidates: Vec<CandidateOutcome>,
}

const MIN_PAIRS: usize = 50;

fn checked_pairs(pairs: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, CopulaError> {
    if pairs.len() < MIN_PAIRS {
        return Err(CopulaError::TooShort {
            needed: MIN_PAIRS,
            got: pairs.len(),
        });
    }
    let mut out = Vec::with_capacity(pairs.len());
    for &(u1, u2) in pairs {
        if !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0) {
            return Err(CopulaError::ArgumentOutOfRange(if u1 > 0.0 && u1 < 1.0 {
                u2
            } else {
                u1
            }));
        }
        // CML ranks are already interior; the clamp only protects against
        // root-solver probes at the edges.
        out.push((
            u1.clamp(super::U_EPS, 1.0 - super::U_EPS),
            u2.clamp(super::U_EPS, 1.0 - super::U_EPS),
        ));
    }
    Ok(out)
}

fn sample_tau(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let prod = (pairs[i].0 - pairs[j].0) * (pairs[i].1 - pairs[j].1);
            if prod > 0.0 {
                s += 1;
            } else if prod < 0.0 {
                s -= 1;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

// --- reparameterization maps -----------------------------------------------

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Natural parameters from the unconstrained vector for a single family.
fn single_from_raw(family: CopulaFamily, raw: &[f64]) -> CopulaSpec {
    match family {
        CopulaFamily::Normal => CopulaSpec::Normal { rho: raw[0].tanh() },
        CopulaFamily::StudentT => CopulaSpec::StudentT {
            rho: raw[0].tanh(),
            nu: (2.0 + raw[1].exp()).min(NU_CAP),
        },
        CopulaFamily::Clayton => CopulaSpec::Clayton { alpha: raw[0].exp() },
        CopulaFamily::SurvClayton => CopulaSpec::SurvClayton { alpha: raw[0].exp() },
        CopulaFamily::Gumbel => CopulaSpec::Gumbel {
            alpha: 1.0 + raw[0].exp(),
        },
        CopulaFamily::SurvGumbel => CopulaSpec::SurvGumbel {
            alpha: 1.0 + raw[0].exp(),
        },
    }
}

/// Unconstrained vector whose image under [`single_from_raw`] is `spec`.
fn raw_from_single(spec: &CopulaSpec) -> Vec<f64> {
    match *spec {
        CopulaSpec::Normal { rho } => vec![rho.atanh()],
        CopulaSpec::StudentT { rho, nu } => vec![rho.atanh(), (nu - 2.0).ln()],
        CopulaSpec::Clayton { alpha } | CopulaSpec::SurvClayton { alpha } => vec![alpha.ln()],
        CopulaSpec::Gumbel { alpha } | CopulaSpec::SurvGumbel { alpha } => {
            vec![(alpha - 1.0).ln()]
        }
    }
}

fn single_init(family: CopulaFamily, tau: f64) -> Vec<f64> {
    let rho0 = (std::f64::consts::PI * tau / 2.0).sin().clamp(-0.95, 0.95);
    match family {
        CopulaFamily::Normal => vec![rho0.atanh()],
        CopulaFamily::StudentT => vec![rho0.atanh(), 6f64.ln()],
        CopulaFamily::Clayton | CopulaFamily::SurvClayton => {
            let alpha = if tau > 0.01 {
                (2.0 * tau / (1.0 - tau)).clamp(0.05, 30.0)
            } else {
                0.3
            };
            vec![alpha.ln()]
        }
        CopulaFamily::Gumbel | CopulaFamily::SurvGumbel => {
            let alpha = if tau > 0.01 {
                (1.0 / (1.0 - tau)).clamp(1.02, 30.0)
            } else {
                1.05
            };
            vec![(alpha - 1.0).ln()]
        }
    }
}

fn single_nll(family: CopulaFamily, raw: &[f64], pairs: &[(f64, f64)]) -> f64 {
    let spec = single_from_raw(family, raw);
    if spec.validate().is_err() {
        return f64::INFINITY;
    }
    let mut nll = 0.0;
    for &(u1, u2) in pairs {
        let lp = spec.ln_pdf_unchecked(u1, u2);
        if !lp.is_finite() {
            return f64::INFINITY;
        }
        nll -= lp;
    }
    nll
}

/// Boundary proximity thresholds per family.
fn single_at_boundary(spec: &CopulaSpec) -> bool {
    match *spec {
        CopulaSpec::Normal { rho } => 1.0 - rho.abs() < 1e-4,
        CopulaSpec::StudentT { rho, nu } => {
            1.0 - rho.abs() < 1e-4 || nu - 2.0 < 1e-2 || NU_CAP - nu < 1e-2
        }
        CopulaSpec::Clayton { alpha } | CopulaSpec::SurvClayton { alpha } => alpha < 1e-2,
        CopulaSpec::Gumbel { alpha } | CopulaSpec::SurvGumbel { alpha } => alpha - 1.0 < 1e-2,
    }
}

fn nm_options(dim: usize) -> NmOptions {
    NmOptions {
        max_evals: 400 * dim.max(1),
        tol_f: 1e-9,
        tol_x: 1e-9,
    }
}

fn finish_single(
    family: CopulaFamily,
    result: NmResult,
    pairs: &[(f64, f64)],
) -> Result<CopulaFit, CopulaError> {
    if !result.fval.is_finite() {
        return Err(CopulaError::OptimizerFailed(format!(
            "{} likelihood did not converge",
            family.name()
        )));
    }
    let spec = single_from_raw(family, &result.x);
    spec.validate()?;
    let loglik = -result.fval;
    let k = family.param_count();
    let aic = 2.0 * k as f64 - 2.0 * loglik;

    let natural = spec.params();
    let hess = hessian::central_hessian(
        |p: &[f64]| {
            let candidate = match family {
                CopulaFamily::Normal => CopulaSpec::Normal { rho: p[0] },
                CopulaFamily::StudentT => CopulaSpec::StudentT { rho: p[0], nu: p[1] },
                CopulaFamily::Clayton => CopulaSpec::Clayton { alpha: p[0] },
                CopulaFamily::SurvClayton => CopulaSpec::SurvClayton { alpha: p[0] },
                CopulaFamily::Gumbel => CopulaSpec::Gumbel { alpha: p[0] },
                CopulaFamily::SurvGumbel => CopulaSpec::SurvGumbel { alpha: p[0] },
            };
            if candidate.validate().is_err() {
                return f64::INFINITY;
            }
            let mut nll = 0.0;
            for &(u1, u2) in pairs {
                nll -= candidate.ln_pdf_unchecked(u1, u2);
            }
            nll
        },
        &natural,
        1e-4,
    );
    let std_errors = hessian::std_errors_from_hessian(&hess);

    Ok(CopulaFit {
        tail: spec.tail_dependence()?,
        kendall_tau: spec.kendall_tau()?,
        model: CopulaModel::Single(spec),
        loglik,
        aic,
        std_errors,
        boundary: single_at_boundary(&spec),
    })
}

/// Maximum-likelihood fit of one single copula family on PIT pairs.
pub fn fit_single(pairs: &[(f64, f64)], family: CopulaFamily) -> Result<CopulaFit, CopulaError> {
    let data = checked_pairs(pairs)?;
    let tau = sample_tau(&data);
    let init = single_init(family, tau);
    let step = vec![0.25; init.len()];
    let result = nelder_mead(
        |raw| single_nll(family, raw, &data),
        &init,
        &step,
        &nm_options(init.len()),
    );
    if !result.converged && !result.fval.is_finite() {
        return Err(CopulaError::OptimizerFailed(format!(
            "{} fit produced no finite likelihood",
            family.name()
        )));
    }
    finish_single(family, result, &data)
}

fn mixed_nll(
    upper: CopulaFamily,
    lower: CopulaFamily,
    raw: &[f64],
    pairs: &[(f64, f64)],
) -> f64 {
    let up = single_from_raw(upper, &raw[0..1]);
    let low = single_from_raw(lower, &raw[1..2]);
    if up.validate().is_err() || low.validate().is_err() {
        return f64::INFINITY;
    }
    let w1 = logistic(raw[2]);
    let w2 = 1.0 - w1;
    let mut nll = 0.0;
    for &(u1, u2) in pairs {
        let density =
            w1 * up.ln_pdf_unchecked(u1, u2).exp() + w2 * low.ln_pdf_unchecked(u1, u2).exp();
        if !(density > 0.0 && density.is_finite()) {
            return f64::INFINITY;
        }
        nll -= density.ln();
    }
    nll
}

/// Maximum-likelihood fit of a two-component mixture with an upper-tail and
/// a lower-tail component.
///
/// Multi-start: weights 0.25/0.5/0.75 at tau-based component inits, plus
/// two near-degenerate starts seeded from the component single-family fits
/// so the mixture can never score below its nested single copulas.
pub fn fit_mixed(
    pairs: &[(f64, f64)],
    upper: CopulaFamily,
    lower: CopulaFamily,
) -> Result<CopulaFit, CopulaError> {
    if !upper.captures_upper_tail() {
        return Err(CopulaError::InvalidParams(format!(
            "{} cannot serve as the upper-tail mixture component",
            upper.name()
        )));
    }
    if !lower.captures_lower_tail() {
        return Err(CopulaError::InvalidParams(format!(
            "{} cannot serve as the lower-tail mixture component",
            lower.name()
        )));
    }
    let data = checked_pairs(pairs)?;
    let tau = sample_tau(&data);
    let up_init = single_init(upper, tau)[0];
    let low_init = single_init(lower, tau)[0];

    let mut starts: Vec<Vec<f64>> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&w| vec![up_init, low_init, logit(w)])
        .collect();
    // Near-degenerate starts at the single-family optima. logit(1 - 1e-12)
    // keeps the weighted log-density within ~1e-9 per observation of the
    // pure component, so nesting holds up to optimizer tolerance.
    if let Ok(up_fit) = fit_single(pairs, upper) {
        if let CopulaModel::Single(spec) = up_fit.model {
            starts.push(vec![raw_from_single(&spec)[0], low_init, logit(1.0 - 1e-12)]);
        }
    }
    if let Ok(low_fit) = fit_single(pairs, lower) {
        if let CopulaModel::Single(spec) = low_fit.model {
            starts.push(vec![up_init, raw_from_single(&spec)[0], logit(1e-12)]);
        }
    }

    let step = vec![0.25, 0.25, 0.5];
    let opts = nm_options(3);
    let mut best: Option<NmResult> = None;
    for start in &starts {
        let result = nelder_mead(
            |raw| mixed_nll(upper, lower, raw, &data),
            start,
            &step,
            &opts,
        );
        if best.as_ref().is_none_or(|b| result.fval < b.fval) {
            best = Some(result);
        }
    }
    let result = best.expect("at least one start");
    if !result.fval.is_finite() {
        return Err(CopulaError::OptimizerFailed(format!(
            "mixture {}+{} produced no finite likelihood",
            upper.name(),
            lower.name()
        )));
    }

    let up_spec = single_from_raw(upper, &result.x[0..1]);
    let low_spec = single_from_raw(lower, &result.x[1..2]);
    let w1 = logistic(result.x[2]);
    let mix = MixedCopulaSpec::new(up_spec, low_spec, (w1, 1.0 - w1))?;
    let loglik = -result.fval;
    let aic = 2.0 * 3.0 - 2.0 * loglik;

    let natural = vec![up_spec.params()[0], low_spec.params()[0], w1];
    let hess = hessian::central_hessian(
        |p: &[f64]| {
            let up_c = single_with_param(upper, p[0]);
            let low_c = single_with_param(lower, p[1]);
            if up_c.validate().is_err()
                || low_c.validate().is_err()
                || !(p[2] > 0.0 && p[2] < 1.0)
            {
                return f64::INFINITY;
            }
            let mut nll = 0.0;
            for &(u1, u2) in &data {
                let density = p[2] * up_c.ln_pdf_unchecked(u1, u2).exp()
                    + (1.0 - p[2]) * low_c.ln_pdf_unchecked(u1, u2).exp();
                if !(density > 0.0 && density.is_finite()) {
                    return f64::INFINITY;
                }
                nll -= density.ln();
            }
            nll
        },
        &natural,
        1e-4,
    );
    let std_errors = hessian::std_errors_from_hessian(&hess);

    let boundary = single_at_boundary(&up_spec)
        || single_at_boundary(&low_spec)
        || w1 < 1e-4
        || w1 > 1.0 - 1e-4;

    Ok(CopulaFit {
        tail: mix.tail_dependence()?,
        kendall_tau: mix.kendall_tau()?,
        model: CopulaModel::Mixed(mix),
        loglik,
        aic,
        std_errors,
        boundary,
    })
}

fn single_with_param(family: CopulaFamily, value: f64) -> CopulaSpec {
    match family {
        CopulaFamily::Normal => CopulaSpec::Normal { rho: value },
        CopulaFamily::StudentT => CopulaSpec::StudentT { rho: value, nu: 6.0 },
        CopulaFamily::Clayton => CopulaSpec::Clayton { alpha: value },
        CopulaFamily::SurvClayton => CopulaSpec::SurvClayton { alpha: value },
        CopulaFamily::Gumbel => CopulaSpec::Gumbel { alpha: value },
        CopulaFamily::SurvGumbel => CopulaSpec::SurvGumbel { alpha: value },
    }
}

fn fit_candidate(pairs: &[(f64, f64)], spec: CandidateSpec) -> Result<CopulaFit, CopulaError> {
    match spec {
        CandidateSpec::Single { family } => fit_single(pairs, family),
        CandidateSpec::Mixed { upper, lower } => fit_mixed(pairs, upper, lower),
    }
}

/// Fits every candidate and returns the minimum-AIC converged fit; ties are
/// broken by fewer parameters, then candidate-list order. Failed candidates
/// are recorded in the outcome list, not fatal.
pub fn select_copula(
    pairs: &[(f64, f64)],
    candidates: &[CandidateSpec],
) -> Result<CopulaSelection, CopulaError> {
    if candidates.is_empty() {
        return Err(CopulaError::InvalidParams(
            "candidate list is empty".to_string(),
        ));
    }
    let outcomes: Vec<CandidateOutcome> = candidates
        .par_iter()
        .map(|&spec| match fit_candidate(pairs, spec) {
            Ok(fit) => CandidateOutcome {
                spec,
                fit: Some(fit),
                error: None,
            },
            Err(e) => CandidateOutcome {
                spec,
                fit: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    // Shortness and bad inputs affect every candidate identically; surface
    // them as the real error rather than AllFitsFailed.
    if outcomes.iter().all(|o| o.fit.is_none()) {
        if let Err(e @ CopulaError::TooShort { .. }) = checked_pairs(pairs) {
            return Err(e);
        }
        if let Err(e @ CopulaError::ArgumentOutOfRange(_)) = checked_pairs(pairs) {
            return Err(e);
        }
        return Err(CopulaError::AllFitsFailed);
    }

    let mut best: Option<&CopulaFit> = None;
    for outcome in &outcomes {
        if let Some(fit) = &outcome.fit {
            let better = match best {
                None => true,
                Some(b) => {
                    fit.aic < b.aic || (fit.aic == b.aic && fit.param_count() < b.param_count())
                }
            };
            if better {
                best = Some(fit);
            }
        }
    }
    let best = best.cloned().ok_or(CopulaError::AllFitsFailed)?;
    Ok(CopulaSelection {
        best,
        candidates: outcomes,
    })
}

//! Bivariate copulas: six single families, two-component mixtures, and the
//! machinery built on them (conditional h-function, tail dependence,
//! Kendall's tau, conditional-inversion sampling).
//!
//! Families and parameter domains:
//! - Normal `rho in (-1, 1)` — tail independent;
//! - Student-t `rho in (-1, 1), nu > 2` — symmetric tail dependence;
//! - Clayton `alpha > 0` — lower tail dependence `2^{-1/alpha}`;
//! - survival Clayton (180-degree rotation) — upper tail dependence;
//! - Gumbel `alpha > 1` — upper tail dependence `2 - 2^{1/alpha}`;
//! - survival Gumbel — lower tail dependence.
//!
//! Elliptical CDFs are evaluated as `C(u1, u2) = ∫_0^{u2} h(u1 | w) dw` by
//! adaptive quadrature of the closed-form conditional; the Archimedean
//! families and both rotations use their closed forms, computed in log space
//! so large parameters stay finite.

mod fit;

pub use fit::{
    fit_mixed, fit_single, select_copula, CandidateOutcome, CandidateSpec, CopulaFit,
    CopulaSelection,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::quad;
use crate::numeric::root;
use crate::numeric::special;

#[derive(Debug, Error)]
pub enum CopulaError {
    #[error("invalid copula parameters: {0}")]
    InvalidParams(String),
    #[error("argument {0} outside the open unit interval")]
    ArgumentOutOfRange(f64),
    #[error("need at least {needed} pairs, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),
    #[error("no copula candidate converged")]
    AllFitsFailed,
}

/// Quadrature tolerance for elliptical CDFs; CoVaR back-substitution
/// residuals inherit this scale.
const CDF_QUAD_TOL: f64 = 1e-12;

/// Clamp bound applied to u arguments before likelihood evaluation.
pub(crate) const U_EPS: f64 = 1e-10;

/// The six single copula families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CopulaFamily {
    Normal,
    StudentT,
    Clayton,
    SurvClayton,
    Gumbel,
    SurvGumbel,
}

impl CopulaFamily {
    /// Families admissible as the upper-tail component of a mixture.
    pub fn captures_upper_tail(self) -> bool {
        matches!(self, CopulaFamily::Gumbel | CopulaFamily::SurvClayton)
    }

    /// Families admissible as the lower-tail component of a mixture.
    pub fn captures_lower_tail(self) -> bool {
        matches!(self, CopulaFamily::Clayton | CopulaFamily::SurvGumbel)
    }

    pub fn param_count(self) -> usize {
        match self {
            CopulaFamily::StudentT => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Normal => "normal",
            CopulaFamily::StudentT => "student_t",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::SurvClayton => "survival_clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::SurvGumbel => "survival_gumbel",
        }
    }
}

/// Lower and upper tail-dependence coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDependence {
    pub lower: f64,
    pub upper: f64,
}

/// A single copula family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaSpec {
    Normal { rho: f64 },
    StudentT { rho: f64, nu: f64 },
    Clayton { alpha: f64 },
    SurvClayton { alpha: f64 },
    Gumbel { alpha: f64 },
    SurvGumbel { alpha: f64 },
}

impl CopulaSpec {
    pub fn family(&self) -> CopulaFamily {
        match self {
            CopulaSpec::Normal { .. } => CopulaFamily::Normal,
            CopulaSpec::StudentT { .. } => CopulaFamily::StudentT,
            CopulaSpec::Clayton { .. } => CopulaFamily::Clayton,
            CopulaSpec::SurvClayton { .. } => CopulaFamily::SurvClayton,
            CopulaSpec::Gumbel { .. } => CopulaFamily::Gumbel,
            CopulaSpec::SurvGumbel { .. } => CopulaFamily::SurvGumbel,
        }
    }

    /// Parameters in their natural order (`rho[, nu]` or `alpha`).
    pub fn params(&self) -> Vec<f64> {
        match *self {
            CopulaSpec::Normal { rho } => vec![rho],
            CopulaSpec::StudentT { rho, nu } => vec![rho, nu],
            CopulaSpec::Clayton { alpha }
            | CopulaSpec::SurvClayton { alpha }
            | CopulaSpec::Gumbel { alpha }
            | CopulaSpec::SurvGumbel { alpha } => vec![alpha],
        }
    }

    pub fn validate(&self) -> Result<(), CopulaError> {
        let bad = |msg: String| Err(CopulaError::InvalidParams(msg));
        match *self {
            CopulaSpec::Normal { rho } => {
                if !(rho > -1.0 && rho < 1.0) {
                    return bad(format!("normal rho must lie in (-1, 1), got {rho}"));
                }
            }
            CopulaSpec::StudentT { rho, nu } => {
                if !(rho > -1.0 && rho < 1.0) {
                    return bad(format!("student-t rho must lie in (-1, 1), got {rho}"));
                }
                if !(nu > 2.0 && nu.is_finite()) {
                    return bad(format!("student-t nr of dof must exceed 2, got {nu}"));
                }
            }
            CopulaSpec::Clayton { alpha } | CopulaSpec::SurvClayton { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return bad(format!("clayton alpha must be positive, got {alpha}"));
                }
            }
            CopulaSpec::Gumbel { alpha } | CopulaSpec::SurvGumbel { alpha } => {
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return bad(format!("gumbel alpha must exceed 1, got {alpha}"));
                }
            }
        }
        Ok(())
    }

    /// Copula CDF `C(u1, u2)`.
    pub fn cdf(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        self.validate()?;
        check_unit(u1)?;
        check_unit(u2)?;
        Ok(self.cdf_unchecked(u1, u2))
    }

    pub(crate) fn cdf_unchecked(&self, u1: f64, u2: f64) -> f64 {
        match *self {
            // C(u1, u2) = ∫_0^{u2} h(u1 | w) dw. Substituting w = F(x)
            // (the conditioning margin's CDF) turns each node into one CDF
            // and one PDF evaluation instead of a root-solved quantile:
            // C = ∫_{-inf}^{F^{-1}(u2)} h(u1 | F(x)) f(x) dx.
            CopulaSpec::Normal { rho } => {
                if rho == 0.0 {
                    return u1 * u2;
                }
                let x1 = special::normal_quantile(u1);
                let x2 = special::normal_quantile(u2);
                let s = (1.0 - rho * rho).sqrt();
                let g = |x: f64| special::normal_cdf((x1 - rho * x) / s) * special::normal_pdf(x);
                // Phi(-8.3) ~ 5e-17: the truncated tail is below quad noise.
                let lo = (-8.3f64).min(x2 - 1.0);
                quad::adaptive_simpson(&g, lo, x2, CDF_QUAD_TOL)
            }
            CopulaSpec::StudentT { rho, nu } => {
                let x1 = special::student_t_quantile(u1, nu);
                let x2 = special::student_t_quantile(u2, nu);
                let s = 1.0 - rho * rho;
                let g = |x: f64| {
                    let scale = ((nu + 1.0) / ((nu + x * x) * s)).sqrt();
                    special::student_t_cdf((x1 - rho * x) * scale, nu + 1.0)
                        * special::student_t_pdf(x, nu)
                };
                let lo = special::student_t_quantile(1e-14, nu).min(x2 - 1.0);
                quad::adaptive_simpson(&g, lo, x2, CDF_QUAD_TOL)
            }
            CopulaSpec::Clayton { alpha } => clayton_cdf(u1, u2, alpha),
            CopulaSpec::Gumbel { alpha } => gumbel_cdf(u1, u2, alpha),
            CopulaSpec::SurvClayton { alpha } => {
                u1 + u2 - 1.0 + clayton_cdf(1.0 - u1, 1.0 - u2, alpha)
            }
            CopulaSpec::SurvGumbel { alpha } => {
                u1 + u2 - 1.0 + gumbel_cdf(1.0 - u1, 1.0 - u2, alpha)
            }
        }
    }

    /// Copula density `c(u1, u2)`.
    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        self.validate()?;
        check_unit(u1)?;
        check_unit(u2)?;
        Ok(self.ln_pdf_unchecked(u1, u2).exp())
    }

    pub(crate) fn ln_pdf_unchecked(&self, u1: f64, u2: f64) -> f64 {
        match *self {
            CopulaSpec::Normal { rho } => {
                let x1 = special::normal_quantile(u1);
                let x2 = special::normal_quantile(u2);
                let r2 = 1.0 - rho * rho;
                -0.5 * r2.ln()
                    - (rho * rho * (x1 * x1 + x2 * x2) - 2.0 * rho * x1 * x2) / (2.0 * r2)
            }
            CopulaSpec::StudentT { rho, nu } => {
                let x1 = special::student_t_quantile(u1, nu);
                let x2 = special::student_t_quantile(u2, nu);
                let r2 = 1.0 - rho * rho;
                let quad_form = (x1 * x1 + x2 * x2 - 2.0 * rho * x1 * x2) / (nu * r2);
                let ln_bivariate = statrs::function::gamma::ln_gamma(0.5 * (nu + 2.0))
                    - statrs::function::gamma::ln_gamma(0.5 * nu)
                    - (nu * std::f64::consts::PI).ln()
                    - 0.5 * r2.ln()
                    - 0.5 * (nu + 2.0) * quad_form.ln_1p();
                ln_bivariate
                    - special::student_t_ln_pdf(x1, nu)
                    - special::student_t_ln_pdf(x2, nu)
            }
            CopulaSpec::Clayton { alpha } => clayton_ln_pdf(u1, u2, alpha),
            CopulaSpec::Gumbel { alpha } => gumbel_ln_pdf(u1, u2, alpha),
            CopulaSpec::SurvClayton { alpha } => clayton_ln_pdf(1.0 - u1, 1.0 - u2, alpha),
            CopulaSpec::SurvGumbel { alpha } => gumbel_ln_pdf(1.0 - u1, 1.0 - u2, alpha),
        }
    }

    /// Conditional distribution `h(u1 | u2) = Pr(U1 <= u1 | U2 = u2) = dC/du2`.
    pub fn hfunc(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        self.validate()?;
        check_unit(u1)?;
        check_unit(u2)?;
        Ok(self.hfunc_unchecked(u1, u2))
    }

    pub(crate) fn hfunc_unchecked(&self, u1: f64, u2: f64) -> f64 {
        match *self {
            CopulaSpec::Normal { rho } => {
                if rho == 0.0 {
                    return u1;
                }
                let x1 = special::normal_quantile(u1);
                let x2 = special::normal_quantile(u2);
                special::normal_cdf((x1 - rho * x2) / (1.0 - rho * rho).sqrt())
            }
            CopulaSpec::StudentT { rho, nu } => {
                let x1 = special::student_t_quantile(u1, nu);
                let x2 = special::student_t_quantile(u2, nu);
                let scale = ((nu + 1.0) / ((nu + x2 * x2) * (1.0 - rho * rho))).sqrt();
                special::student_t_cdf((x1 - rho * x2) * scale, nu + 1.0)
            }
            CopulaSpec::Clayton { alpha } => clayton_hfunc(u1, u2, alpha),
            CopulaSpec::Gumbel { alpha } => gumbel_hfunc(u1, u2, alpha),
            CopulaSpec::SurvClayton { alpha } => {
                1.0 - clayton_hfunc(1.0 - u1, 1.0 - u2, alpha)
            }
            CopulaSpec::SurvGumbel { alpha } => 1.0 - gumbel_hfunc(1.0 - u1, 1.0 - u2, alpha),
        }
    }

    /// Closed-form tail-dependence coefficients.
    pub fn tail_dependence(&self) -> Result<TailDependence, CopulaError> {
        self.validate()?;
        Ok(match *self {
            CopulaSpec::Normal { .. } => TailDependence {
                lower: 0.0,
                upper: 0.0,
            },
            CopulaSpec::StudentT { rho, nu } => {
                let lam = 2.0
                    * special::student_t_cdf(
                        -((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(),
                        nu + 1.0,
                    );
                TailDependence {
                    lower: lam,
                    upper: lam,
                }
            }
            CopulaSpec::Clayton { alpha } => TailDependence {
                lower: 2f64.powf(-1.0 / alpha),
                upper: 0.0,
            },
            CopulaSpec::SurvClayton { alpha } => TailDependence {
                lower: 0.0,
                upper: 2f64.powf(-1.0 / alpha),
            },
            CopulaSpec::Gumbel { alpha } => TailDependence {
                lower: 0.0,
                upper: 2.0 - 2f64.powf(1.0 / alpha),
            },
            CopulaSpec::SurvGumbel { alpha } => TailDependence {
                lower: 2.0 - 2f64.powf(1.0 / alpha),
                upper: 0.0,
            },
        })
    }

    /// Kendall's tau in closed form: `(2/pi) asin(rho)` for the elliptical
    /// families, `alpha/(alpha+2)` for Clayton, `1 - 1/alpha` for Gumbel;
    /// 180-degree rotation preserves concordance.
    pub fn kendall_tau(&self) -> Result<f64, CopulaError> {
        self.validate()?;
        Ok(match *self {
            CopulaSpec::Normal { rho } | CopulaSpec::StudentT { rho, .. } => {
                2.0 / std::f64::consts::PI * rho.asin()
            }
            CopulaSpec::Clayton { alpha } | CopulaSpec::SurvClayton { alpha } => {
                alpha / (alpha + 2.0)
            }
            CopulaSpec::Gumbel { alpha } | CopulaSpec::SurvGumbel { alpha } => 1.0 - 1.0 / alpha,
        })
    }

    /// Conditional-inversion sampling, deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<(f64, f64)>, CopulaError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count).map(|_| self.draw(&mut rng)).collect())
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let u2 = open_unit(rng);
        let w = open_unit(rng);
        (self.invert_hfunc(w, u2), u2)
    }

    /// Solves `h(u1 | u2) = w` for `u1` by bisection.
    pub(crate) fn invert_hfunc(&self, w: f64, u2: f64) -> f64 {
        let lo = U_EPS;
        let hi = 1.0 - U_EPS;
        if self.hfunc_unchecked(lo, u2) >= w {
            return lo;
        }
        if self.hfunc_unchecked(hi, u2) <= w {
            return hi;
        }
        root::bisect(
            &|u1: f64| self.hfunc_unchecked(u1, u2) - w,
            lo,
            hi,
            1e-10,
            200,
        )
        .unwrap_or(0.5 * (lo + hi))
    }
}

/// A convex two-component mixture: one upper-tail family (Gumbel or
/// survival Clayton) plus one lower-tail family (Clayton or survival
/// Gumbel), with simplex weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedCopulaSpec {
    pub upper: CopulaSpec,
    pub lower: CopulaSpec,
    pub weights: (f64, f64),
}

impl MixedCopulaSpec {
    pub fn new(
        upper: CopulaSpec,
        lower: CopulaSpec,
        weights: (f64, f64),
    ) -> Result<Self, CopulaError> {
        let spec = Self {
            upper,
            lower,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CopulaError> {
        if !self.upper.family().captures_upper_tail() {
            return Err(CopulaError::InvalidParams(format!(
                "{} cannot serve as the upper-tail mixture component",
                self.upper.family().name()
            )));
        }
        if !self.lower.family().captures_lower_tail() {
            return Err(CopulaError::InvalidParams(format!(
                "{} cannot serve as the lower-tail mixture component",
                self.lower.family().name()
            )));
        }
        self.upper.validate()?;
        self.lower.validate()?;
        let (w1, w2) = self.weights;
        if !(w1 >= 0.0 && w2 >= 0.0 && (w1 + w2 - 1.0).abs() <= 1e-12) {
            return Err(CopulaError::InvalidParams(format!(
                "weights must be non-negative and sum to 1, got ({w1}, {w2})"
            )));
        }
        Ok(())
    }

    pub fn cdf(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        self.validate()?;
        check_unit(u1)?;
        check_unit(u2)?;
        Ok(self.cdf_unchecked(u1, u2))
    }

    pub(crate) fn cdf_unchecked(&self, u1: f64, u2: f64) -> f64 {
        self.weights.0 * self.upper.cdf_unchecked(u1, u2)
            + self.weights.1 * self.lower.cdf_unchecked(u1, u2)
    }

    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        self.validate()?;
        check_unit(u1)?;
        check_unit(u2)?;
        Ok(self.pdf_unchecked(u1, u2))
    }

    pub(crate) fn pdf_unchecked(&self, u1: f64, u2: f64) -> f64 {
        self.weights.0 * self.upper.ln_pdf_unchecked(u1, u2).exp()
            + self.weights.1 * self.lower.ln_pdf_unchecked(u1, u2).exp()
    }

    pub(crate) fn ln_pdf_unchecked(&self, u1: f64, u2: f64) -> f64 {
        self.pdf_unchecked(u1, u2).ln()
    }

    pub fn hfunc(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        self.validate()?;
        check_unit(u1)?;
        check_unit(u2)?;
        Ok(self.hfunc_unchecked(u1, u2))
    }

    pub(crate) fn hfunc_unchecked(&self, u1: f64, u2: f64) -> f64 {
        self.weights.0 * self.upper.hfunc_unchecked(u1, u2)
            + self.weights.1 * self.lower.hfunc_unchecked(u1, u2)
    }

    /// Weighted component coefficients.
    pub fn tail_dependence(&self) -> Result<TailDependence, CopulaError> {
        self.validate()?;
        let up = self.upper.tail_dependence()?;
        let low = self.lower.tail_dependence()?;
        Ok(TailDependence {
            lower: self.weights.0 * up.lower + self.weights.1 * low.lower,
            upper: self.weights.0 * up.upper + self.weights.1 * low.upper,
        })
    }

    /// Kendall's tau as `4 ∫∫ C dC - 1`, by 128x128 tensorized
    /// Gauss-Legendre quadrature (no closed form for the cross terms).
    pub fn kendall_tau(&self) -> Result<f64, CopulaError> {
        self.validate()?;
        let (nodes, weights) = quad::gauss_legendre_unit_128();
        let mut acc = 0.0;
        for (i, &ui) in nodes.iter().enumerate() {
            let mut inner = 0.0;
            for (j, &vj) in nodes.iter().enumerate() {
                inner += weights[j] * self.cdf_unchecked(ui, vj) * self.pdf_unchecked(ui, vj);
            }
            acc += weights[i] * inner;
        }
        Ok(4.0 * acc - 1.0)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<(f64, f64)>, CopulaError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count).map(|_| self.draw(&mut rng)).collect())
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let pick: f64 = rng.random();
        if pick < self.weights.0 {
            self.upper.draw(rng)
        } else {
            self.lower.draw(rng)
        }
    }
}

/// Either a single copula or a two-component mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CopulaModel {
    Single(CopulaSpec),
    Mixed(MixedCopulaSpec),
}

impl CopulaModel {
    pub fn validate(&self) -> Result<(), CopulaError> {
        match self {
            CopulaModel::Single(s) => s.validate(),
            CopulaModel::Mixed(m) => m.validate(),
        }
    }

    pub fn cdf(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        match self {
            CopulaModel::Single(s) => s.cdf(u1, u2),
            CopulaModel::Mixed(m) => m.cdf(u1, u2),
        }
    }

    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        match self {
            CopulaModel::Single(s) => s.pdf(u1, u2),
            CopulaModel::Mixed(m) => m.pdf(u1, u2),
        }
    }

    pub fn hfunc(&self, u1: f64, u2: f64) -> Result<f64, CopulaError> {
        match self {
            CopulaModel::Single(s) => s.hfunc(u1, u2),
            CopulaModel::Mixed(m) => m.hfunc(u1, u2),
        }
    }

    pub fn tail_dependence(&self) -> Result<TailDependence, CopulaError> {
        match self {
            CopulaModel::Single(s) => s.tail_dependence(),
            CopulaModel::Mixed(m) => m.tail_dependence(),
        }
    }

    pub fn kendall_tau(&self) -> Result<f64, CopulaError> {
        match self {
            CopulaModel::Single(s) => s.kendall_tau(),
            CopulaModel::Mixed(m) => m.kendall_tau(),
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<(f64, f64)>, CopulaError> {
        match self {
            CopulaModel::Single(s) => s.sample(count, seed),
            CopulaModel::Mixed(m) => m.sample(count, seed),
        }
    }

    /// Survival-copula CDF `Pr(U1 > a', U2 > b')` expressed on rotated
    /// arguments: `a + b - 1 + C(1-a, 1-b)`.
    pub fn survival_cdf(&self, a: f64, b: f64) -> Result<f64, CopulaError> {
        Ok(a + b - 1.0 + self.cdf(1.0 - a, 1.0 - b)?)
    }

    pub(crate) fn cdf_unchecked(&self, u1: f64, u2: f64) -> f64 {
        match self {
            CopulaModel::Single(s) => s.cdf_unchecked(u1, u2),
            CopulaModel::Mixed(m) => m.cdf_unchecked(u1, u2),
        }
    }

    pub(crate) fn hfunc_unchecked(&self, u1: f64, u2: f64) -> f64 {
        match self {
            CopulaModel::Single(s) => s.hfunc_unchecked(u1, u2),
            CopulaModel::Mixed(m) => m.hfunc_unchecked(u1, u2),
        }
    }

    pub(crate) fn ln_pdf_unchecked(&self, u1: f64, u2: f64) -> f64 {
        match self {
            CopulaModel::Single(s) => s.ln_pdf_unchecked(u1, u2),
            CopulaModel::Mixed(m) => m.ln_pdf_unchecked(u1, u2),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            CopulaModel::Single(s) => s.family().param_count(),
            // Two one-parameter components plus the free weight.
            CopulaModel::Mixed(_) => 3,
        }
    }

    /// Natural parameter vector: single families as in
    /// [`CopulaSpec::params`], mixtures as `[theta_upper, theta_lower, w1]`.
    pub fn params(&self) -> Vec<f64> {
        match self {
            CopulaModel::Single(s) => s.params(),
            CopulaModel::Mixed(m) => {
                vec![m.upper.params()[0], m.lower.params()[0], m.weights.0]
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CopulaModel::Single(s) => s.family().name().to_string(),
            CopulaModel::Mixed(m) => format!(
                "mixture({} + {})",
                m.upper.family().name(),
                m.lower.family().name()
            ),
        }
    }
}

fn check_unit(u: f64) -> Result<(), CopulaError> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(CopulaError::ArgumentOutOfRange(u))
    }
}

pub(crate) fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}

// ---------------------------------------------------------------------------
// Archimedean closed forms, in log space.

/// log(u1^-a + u2^-a - 1), overflow-safe for large `a`.
fn clayton_ln_sum(u1: f64, u2: f64, alpha: f64) -> f64 {
    let a = -alpha * u1.ln();
    let b = -alpha * u2.ln();
    let m = a.max(b).max(0.0);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

fn clayton_cdf(u1: f64, u2: f64, alpha: f64) -> f64 {
    (-clayton_ln_sum(u1, u2, alpha) / alpha).exp()
}

fn clayton_hfunc(u1: f64, u2: f64, alpha: f64) -> f64 {
    let ln_sum = clayton_ln_sum(u1, u2, alpha);
    (-(alpha + 1.0) * u2.ln() - (1.0 + 1.0 / alpha) * ln_sum).exp()
}

fn clayton_ln_pdf(u1: f64, u2: f64, alpha: f64) -> f64 {
    let ln_sum = clayton_ln_sum(u1, u2, alpha);
    (1.0 + alpha).ln() - (alpha + 1.0) * (u1.ln() + u2.ln()) - (2.0 + 1.0 / alpha) * ln_sum
}

/// log((-ln u1)^a + (-ln u2)^a), overflow-safe for large `a`.
fn gumbel_ln_sum(u1: f64, u2: f64, alpha: f64) -> f64 {
    let lx = (-u1.ln()).ln();
    let ly = (-u2.ln()).ln();
    let a = alpha * lx;
    let b = alpha * ly;
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn gumbel_cdf(u1: f64, u2: f64, alpha: f64) -> f64 {
    (-(gumbel_ln_sum(u1, u2, alpha) / alpha).exp()).exp()
}

fn gumbel_hfunc(u1: f64, u2: f64, alpha: f64) -> f64 {
    let ln_s = gumbel_ln_sum(u1, u2, alpha);
    let big_a = (ln_s / alpha).exp();
    // C(u1,u2) * A^{1-alpha} * (-ln u2)^{alpha-1} / u2.
    (-big_a + (1.0 / alpha - 1.0) * ln_s + (alpha - 1.0) * (-u2.ln()).ln() - u2.ln()).exp()
}

fn gumbel_ln_pdf(u1: f64, u2: f64, alpha: f64) -> f64 {
    let ln_s = gumbel_ln_sum(u1, u2, alpha);
    let big_a = (ln_s / alpha).exp();
    -big_a
        + (alpha - 1.0) * ((-u1.ln()).ln() + (-u2.ln()).ln())
        - u1.ln()
        - u2.ln()
        + (2.0 / alpha - 2.0) * ln_s
        + ((alpha - 1.0) / big_a).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn all_specs() -> Vec<CopulaSpec> {
        vec![
            CopulaSpec::Normal { rho: 0.6 },
            CopulaSpec::StudentT { rho: 0.5, nu: 4.0 },
            CopulaSpec::Clayton { alpha: 2.0 },
            CopulaSpec::SurvClayton { alpha: 2.0 },
            CopulaSpec::Gumbel { alpha: 2.0 },
            CopulaSpec::SurvGumbel { alpha: 2.0 },
        ]
    }

    #[test]
    fn clayton_cdf_hand_value() {
        let c = CopulaSpec::Clayton { alpha: 2.0 };
        // (4 + 4 - 1)^{-1/2} = 7^{-1/2}.
        assert_abs_diff_eq!(
            c.cdf(0.5, 0.5).unwrap(),
            0.3779644730092272,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gumbel_cdf_hand_value() {
        let c = CopulaSpec::Gumbel { alpha: 2.0 };
        // 2^{-sqrt(2)}.
        assert_abs_diff_eq!(
            c.cdf(0.5, 0.5).unwrap(),
            0.37521422724648176,
            epsilon = 1e-12
        );
    }

    #[test]
    fn normal_independence_product() {
        let c = CopulaSpec::Normal { rho: 0.0 };
        for &(u1, u2) in &[(0.3, 0.7), (0.05, 0.95), (0.5, 0.5)] {
            assert_abs_diff_eq!(c.cdf(u1, u2).unwrap(), u1 * u2, epsilon = 1e-10);
            assert_abs_diff_eq!(c.pdf(u1, u2).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(c.hfunc(u1, u2).unwrap(), u1, epsilon = 1e-12);
        }
    }

    #[test]
    fn student_t_cdf_reference_value() {
        // Independent double-integral reference computed at 30 digits.
        let c = CopulaSpec::StudentT { rho: 0.5, nu: 4.0 };
        assert_abs_diff_eq!(
            c.cdf(0.3, 0.7).unwrap(),
            0.2614278367301441,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            c.pdf(0.3, 0.7).unwrap(),
            0.8317621445595838,
            epsilon = 1e-9
        );
    }

    #[test]
    fn boundary_behaviour() {
        for spec in all_specs() {
            for &u in &[0.2, 0.5, 0.8] {
                let near_one = spec.cdf(u, 1.0 - 1e-12).unwrap();
                assert_abs_diff_eq!(near_one, u, epsilon = 1e-8);
                let near_zero = spec.cdf(u, 1e-12).unwrap();
                assert!(
                    (-1e-12..=1e-12 + 1e-8).contains(&near_zero),
                    "{spec:?} grounded: {near_zero}"
                );
            }
        }
    }

    #[test]
    fn rotation_identity_exact() {
        let base = CopulaSpec::Clayton { alpha: 2.5 };
        let rotated = CopulaSpec::SurvClayton { alpha: 2.5 };
        for &(u1, u2) in &[(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            let lhs = rotated.cdf(u1, u2).unwrap();
            let rhs = u1 + u2 - 1.0 + base.cdf(1.0 - u1, 1.0 - u2).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-15);
        }
    }

    #[test]
    fn exchangeability() {
        for spec in all_specs() {
            for &(u1, u2) in &[(0.2, 0.7), (0.05, 0.6), (0.33, 0.91)] {
                assert_abs_diff_eq!(
                    spec.cdf(u1, u2).unwrap(),
                    spec.cdf(u2, u1).unwrap(),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn frechet_bounds_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in all_specs() {
            for _ in 0..200 {
                let u1 = open_unit(&mut rng);
                let u2 = open_unit(&mut rng);
                let c = spec.cdf(u1, u2).unwrap();
                assert!(c >= (u1 + u2 - 1.0).max(0.0) - 1e-8, "{spec:?} lower");
                assert!(c <= u1.min(u2) + 1e-8, "{spec:?} upper");
            }
        }
    }

    #[test]
    fn pdf_matches_cdf_finite_difference() {
        for spec in all_specs() {
            // Elliptical CDFs carry ~1e-12 quadrature noise, so their mixed
            // difference needs the wider step.
            let h = match spec {
                CopulaSpec::Normal { .. } | CopulaSpec::StudentT { .. } => 3e-4,
                _ => 1e-5,
            };
            for &(u1, u2) in &[(0.3, 0.6), (0.45, 0.25)] {
                let fd = (spec.cdf(u1 + h, u2 + h).unwrap() - spec.cdf(u1 + h, u2 - h).unwrap()
                    - spec.cdf(u1 - h, u2 + h).unwrap()
                    + spec.cdf(u1 - h, u2 - h).unwrap())
                    / (4.0 * h * h);
                let pdf = spec.pdf(u1, u2).unwrap();
                assert!(
                    (pdf - fd).abs() < 1e-5 * (1.0 + pdf),
                    "{spec:?}: pdf {pdf} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn hfunc_matches_cdf_finite_difference() {
        let h = 1e-6;
        for spec in all_specs() {
            for &(u1, u2) in &[(0.3, 0.6), (0.7, 0.35)] {
                let fd =
                    (spec.cdf(u1, u2 + h).unwrap() - spec.cdf(u1, u2 - h).unwrap()) / (2.0 * h);
                let hv = spec.hfunc(u1, u2).unwrap();
                assert!(
                    (hv - fd).abs() < 1e-5,
                    "{spec:?}: h {hv} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn clayton_hfunc_hand_value() {
        let c = CopulaSpec::Clayton { alpha: 2.0 };
        // Verified against the central finite difference of Eq. (9).
        assert_abs_diff_eq!(
            c.hfunc(0.3, 0.6).unwrap(),
            0.10005136755229087,
            epsilon = 1e-10
        );
    }

    #[test]
    fn normal_hfunc_median() {
        let c = CopulaSpec::Normal { rho: 0.5 };
        assert_abs_diff_eq!(c.hfunc(0.5, 0.5).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn hfunc_monotone_and_saturates() {
        for spec in all_specs() {
            let mut prev = 0.0;
            for i in 1..40 {
                let u1 = i as f64 / 40.0;
                let h = spec.hfunc(u1, 0.37).unwrap();
                assert!(h >= prev - 1e-12, "{spec:?} not monotone at {u1}");
                prev = h;
            }
            assert_abs_diff_eq!(
                spec.hfunc(1.0 - 1e-12, 0.37).unwrap(),
                1.0,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn tail_dependence_values() {
        let c = CopulaSpec::Clayton { alpha: 1.0 }.tail_dependence().unwrap();
        assert_eq!(c.lower, 0.5);
        assert_eq!(c.upper, 0.0);

        let g = CopulaSpec::Gumbel { alpha: 2.0 }.tail_dependence().unwrap();
        assert_abs_diff_eq!(g.upper, 0.5857864376269049, epsilon = 1e-12);
        assert_eq!(g.lower, 0.0);

        let n = CopulaSpec::Normal { rho: 0.8 }.tail_dependence().unwrap();
        assert_eq!((n.lower, n.upper), (0.0, 0.0));
    }

    #[test]
    fn tail_dependence_rotation_consistency() {
        for alpha in [0.5, 1.0, 2.7] {
            let c = CopulaSpec::Clayton { alpha }.tail_dependence().unwrap();
            let sc = CopulaSpec::SurvClayton { alpha }.tail_dependence().unwrap();
            assert_eq!(c.lower, sc.upper);
        }
        for alpha in [1.3, 2.0, 4.5] {
            let g = CopulaSpec::Gumbel { alpha }.tail_dependence().unwrap();
            let sg = CopulaSpec::SurvGumbel { alpha }.tail_dependence().unwrap();
            assert_eq!(g.upper, sg.lower);
        }
    }

    #[test]
    fn paper_mixture_tail_dependence() {
        let mix = MixedCopulaSpec::new(
            CopulaSpec::Gumbel { alpha: 3.5740 },
            CopulaSpec::SurvGumbel { alpha: 3.2474 },
            (0.5136, 0.4864),
        )
        .unwrap();
        let tail = mix.tail_dependence().unwrap();
        assert_abs_diff_eq!(tail.upper, 0.4037, epsilon = 5e-4);
        assert_abs_diff_eq!(tail.lower, 0.3707, epsilon = 5e-4);
    }

    #[test]
    fn kendall_tau_closed_forms() {
        assert_abs_diff_eq!(
            CopulaSpec::Gumbel { alpha: 2.0 }.kendall_tau().unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            CopulaSpec::Normal { rho: 0.0 }.kendall_tau().unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            CopulaSpec::Clayton { alpha: 2.0 }.kendall_tau().unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn mixture_tau_quadrature_agrees_with_closed_form() {
        // A degenerate mixture (w1 = 0) must reproduce the Clayton tau.
        let mix = MixedCopulaSpec::new(
            CopulaSpec::Gumbel { alpha: 2.0 },
            CopulaSpec::Clayton { alpha: 2.0 },
            (0.0, 1.0),
        )
        .unwrap();
        assert_abs_diff_eq!(mix.kendall_tau().unwrap(), 0.5, epsilon = 1e-4);

        // The Gumbel integrand diverges like 1/t at the (1,1) corner, which
        // costs the 128-node rule a few 1e-4 of accuracy there; tau is
        // reported to ~1e-2 against the reference tables.
        let mix = MixedCopulaSpec::new(
            CopulaSpec::Gumbel { alpha: 2.0 },
            CopulaSpec::Clayton { alpha: 2.0 },
            (1.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(mix.kendall_tau().unwrap(), 0.5, epsilon = 1e-3);
    }

    #[test]
    fn archimedean_independence_limits() {
        let gumbel = CopulaSpec::Gumbel { alpha: 1.0 + 1e-6 };
        let clayton = CopulaSpec::Clayton { alpha: 1e-6 };
        for &(u1, u2) in &[(0.3, 0.6), (0.8, 0.2), (0.5, 0.5)] {
            assert_abs_diff_eq!(gumbel.cdf(u1, u2).unwrap(), u1 * u2, epsilon = 1e-4);
            assert_abs_diff_eq!(clayton.cdf(u1, u2).unwrap(), u1 * u2, epsilon = 1e-4);
        }
    }

    #[test]
    fn mixture_density_is_weighted_sum() {
        let mix = MixedCopulaSpec::new(
            CopulaSpec::Gumbel { alpha: 2.5 },
            CopulaSpec::SurvGumbel { alpha: 3.0 },
            (0.4, 0.6),
        )
        .unwrap();
        let (u1, u2) = (0.35, 0.75);
        let expect = 0.4 * mix.upper.pdf(u1, u2).unwrap() + 0.6 * mix.lower.pdf(u1, u2).unwrap();
        assert_abs_diff_eq!(mix.pdf(u1, u2).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn mixture_rejects_wrong_components() {
        assert!(MixedCopulaSpec::new(
            CopulaSpec::Clayton { alpha: 2.0 },
            CopulaSpec::SurvGumbel { alpha: 2.0 },
            (0.5, 0.5),
        )
        .is_err());
        assert!(MixedCopulaSpec::new(
            CopulaSpec::Gumbel { alpha: 2.0 },
            CopulaSpec::SurvGumbel { alpha: 2.0 },
            (0.7, 0.7),
        )
        .is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CopulaSpec::Normal { rho: 1.0 }.cdf(0.5, 0.5).is_err());
        assert!(CopulaSpec::Clayton { alpha: 0.0 }.cdf(0.5, 0.5).is_err());
        assert!(CopulaSpec::Gumbel { alpha: 1.0 }.cdf(0.5, 0.5).is_err());
        assert!(CopulaSpec::StudentT { rho: 0.5, nu: 2.0 }.cdf(0.5, 0.5).is_err());
        assert!(matches!(
            CopulaSpec::Normal { rho: 0.5 }.cdf(0.0, 0.5),
            Err(CopulaError::ArgumentOutOfRange(_))
        ));
    }

    #[test]
    fn sampling_normal_independence_correlation() {
        let spec = CopulaSpec::Normal { rho: 0.0 };
        let pairs = spec.sample(10_000, 21).unwrap();
        let n = pairs.len() as f64;
        let mx: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        let mut sxy = 0.0;
        for (x, y) in &pairs {
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
            sxy += (x - mx) * (y - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 0.03, "corr = {corr}");
    }

    #[test]
    fn sampling_gumbel_recovers_tau() {
        let spec = CopulaSpec::Gumbel { alpha: 2.0 };
        let pairs = spec.sample(10_000, 22).unwrap();
        let tau = sample_kendall_tau(&pairs);
        assert!((tau - 0.5).abs() < 0.03, "tau = {tau}");
    }

    #[test]
    fn sampling_ecdf_matches_cdf() {
        for spec in [
            CopulaSpec::Clayton { alpha: 2.0 },
            CopulaSpec::StudentT { rho: 0.5, nu: 5.0 },
            CopulaSpec::SurvGumbel { alpha: 2.0 },
        ] {
            let pairs = spec.sample(10_000, 23).unwrap();
            let ecdf = pairs.iter().filter(|p| p.0 <= 0.5 && p.1 <= 0.5).count() as f64
                / pairs.len() as f64;
            let cdf = spec.cdf(0.5, 0.5).unwrap();
            assert!((ecdf - cdf).abs() < 0.02, "{spec:?}: {ecdf} vs {cdf}");
        }
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let spec = CopulaSpec::Gumbel { alpha: 2.0 };
        assert_eq!(
            spec.sample(32, 7).unwrap(),
            spec.sample(32, 7).unwrap()
        );
        assert_ne!(
            spec.sample(32, 7).unwrap(),
            spec.sample(32, 8).unwrap()
        );
    }

    pub(crate) fn sample_kendall_tau(pairs: &[(f64, f64)]) -> f64 {
        let n = pairs.len();
        let mut s = 0i64;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pairs[i].0 - pairs[j].0;
                let dy = pairs[i].1 - pairs[j].1;
                let prod = dx * dy;
                if prod > 0.0 {
                    s += 1;
                } else if prod < 0.0 {
                    s -= 1;
                }
            }
        }
        s as f64 / (n * (n - 1) / 2) as f64
    }
}

//! Hansen's skewed Student-t distribution and the standard Student-t.
//!
//! The skewed Student-t is the innovation law of the marginal models. It is
//! standardized (zero mean, unit variance) for all valid parameters, with
//! density
//!
//! ```text
//! f(z) = b c [1 + ((b z + a) / (1 - eta))^2 / (nu - 2)]^{-(nu+1)/2},  z <  -a/b
//! f(z) = b c [1 + ((b z + a) / (1 + eta))^2 / (nu - 2)]^{-(nu+1)/2},  z >= -a/b
//! ```
//!
//! where `a = 4 eta c (nu-2)/(nu-1)`, `b^2 = 1 + 3 eta^2 - a^2`, and
//! `c = Gamma((nu+1)/2) / (sqrt(pi (nu-2)) Gamma(nu/2))`.
//!
//! Each branch is an affine image of a Student-t with `nu` degrees of
//! freedom, which gives closed-form CDF and quantile: with
//! `s = sqrt(nu/(nu-2))` the CDF below the kink `z = -a/b` is
//! `(1-eta) T_nu(s (b z + a)/(1-eta))` and the kink itself sits at
//! cumulative probability `(1-eta)/2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::special;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
}

/// Parameters of Hansen's skewed Student-t: degrees of freedom `nu > 2`
/// and asymmetry `eta` in `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTParams {
    pub nu: f64,
    pub eta: f64,
}

impl SkewTParams {
    pub fn new(nu: f64, eta: f64) -> Result<Self, DistError> {
        let p = Self { nu, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DistError> {
        if !(self.nu > 2.0 && self.nu.is_finite()) {
            return Err(DistError::InvalidParams(format!(
                "degrees of freedom must exceed 2, got {}",
                self.nu
            )));
        }
        if !(self.eta > -1.0 && self.eta < 1.0) {
            return Err(DistError::InvalidParams(format!(
                "asymmetry must lie in (-1, 1), got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// The constants `a`, `b`, `c` of the skewed Student-t density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// A validated skewed Student-t with precomputed constants, for hot loops.
#[derive(Debug, Clone, Copy)]
pub struct SkewT {
    params: SkewTParams,
    consts: SkewTConstants,
    ln_bc: f64,
    /// sqrt(nu / (nu - 2)): rescales each branch to a standard t.
    scale: f64,
}

impl SkewT {
    pub fn new(params: SkewTParams) -> Result<Self, DistError> {
        params.validate()?;
        let SkewTParams { nu, eta } = params;
        // c in log space; nu up to ~35 appears in practice and plain Gamma
        // overflows beyond ~170.
        let ln_c = statrs::function::gamma::ln_gamma(0.5 * (nu + 1.0))
            - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln()
            - statrs::function::gamma::ln_gamma(0.5 * nu);
        let c = ln_c.exp();
        let a = 4.0 * eta * c * (nu - 2.0) / (nu - 1.0);
        let b_sq = 1.0 + 3.0 * eta * eta - a * a;
        if b_sq <= 0.0 {
            return Err(DistError::InvalidParams(format!(
                "degenerate scale constant b^2 = {b_sq}"
            )));
        }
        let b = b_sq.sqrt();
        Ok(Self {
            params,
            consts: SkewTConstants { a, b, c },
            ln_bc: b.ln() + ln_c,
            scale: (nu / (nu - 2.0)).sqrt(),
        })
    }

    pub fn params(&self) -> SkewTParams {
        self.params
    }

    pub fn constants(&self) -> SkewTConstants {
        self.consts
    }

    /// Location of the density kink, `-a/b`.
    pub fn kink(&self) -> f64 {
        -self.consts.a / self.consts.b
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        let SkewTParams { nu, eta } = self.params;
        let SkewTConstants { a, b, .. } = self.consts;
        let side = if z < self.kink() { 1.0 - eta } else { 1.0 + eta };
        let q = (b * z + a) / side;
        self.ln_bc - 0.5 * (nu + 1.0) * (q * q / (nu - 2.0)).ln_1p()
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.ln_pdf(z).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let SkewTParams { nu, eta } = self.params;
        let SkewTConstants { a, b, .. } = self.consts;
        if z < self.kink() {
            let x = self.scale * (b * z + a) / (1.0 - eta);
            (1.0 - eta) * special::student_t_cdf(x, nu)
        } else {
            let x = self.scale * (b * z + a) / (1.0 + eta);
            0.5 * (1.0 - eta) + (1.0 + eta) * (special::student_t_cdf(x, nu) - 0.5)
        }
    }

    /// Inverse CDF. The branch is selected by comparing `p` with the exact
    /// kink probability `(1 - eta)/2`.
    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistError::ProbabilityOutOfRange(p));
        }
        let SkewTParams { nu, eta } = self.params;
        let SkewTConstants { a, b, .. } = self.consts;
        let kink_p = 0.5 * (1.0 - eta);
        let z = if p < kink_p {
            let t = special::student_t_quantile(p / (1.0 - eta), nu);
            ((1.0 - eta) * t / self.scale - a) / b
        } else {
            let t = special::student_t_quantile(0.5 + (p - kink_p) / (1.0 + eta), nu);
            ((1.0 + eta) * t / self.scale - a) / b
        };
        Ok(z)
    }
}

/// The constants `a`, `b`, `c` for the given parameters.
pub fn skewt_constants(params: &SkewTParams) -> Result<SkewTConstants, DistError> {
    Ok(SkewT::new(*params)?.constants())
}

/// Skewed Student-t density at `z`.
pub fn skewt_pdf(z: f64, params: &SkewTParams) -> Result<f64, DistError> {
    Ok(SkewT::new(*params)?.pdf(z))
}

/// Skewed Student-t CDF at `z`.
pub fn skewt_cdf(z: f64, params: &SkewTParams) -> Result<f64, DistError> {
    Ok(SkewT::new(*params)?.cdf(z))
}

/// Skewed Student-t quantile at probability `p` in `(0, 1)`.
pub fn skewt_quantile(p: f64, params: &SkewTParams) -> Result<f64, DistError> {
    SkewT::new(*params)?.quantile(p)
}

/// Standard Student-t CDF with `nu > 0` degrees of freedom.
pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64, DistError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(DistError::InvalidParams(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    Ok(special::student_t_cdf(x, nu))
}

/// Standard Student-t quantile with `nu > 0` degrees of freedom.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64, DistError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(DistError::InvalidParams(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(DistError::ProbabilityOutOfRange(p));
    }
    Ok(special::student_t_quantile(p, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(nu: f64, eta: f64) -> SkewTParams {
        SkewTParams::new(nu, eta).unwrap()
    }

    #[test]
    fn constants_symmetric_case() {
        // nu = 5, eta = 0: a = 0, b = 1, c = Gamma(3)/(sqrt(3 pi) Gamma(2.5)).
        let c = skewt_constants(&params(5.0, 0.0)).unwrap();
        assert_abs_diff_eq!(c.a, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.b, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.c, 0.490070129263815, epsilon = 1e-12);
    }

    #[test]
    fn constants_satisfy_defining_equalities() {
        for &(nu, eta) in &[(5.0, 0.3), (3.0, -0.5), (10.0, 0.5), (30.0, -0.2)] {
            let k = skewt_constants(&params(nu, eta)).unwrap();
            assert_abs_diff_eq!(
                k.a,
                4.0 * eta * k.c * (nu - 2.0) / (nu - 1.0),
                epsilon = 1e-15
            );
            assert_abs_diff_eq!(k.b * k.b, 1.0 + 3.0 * eta * eta - k.a * k.a, epsilon = 1e-14);
            assert!(k.b > 0.0 && k.c > 0.0);
        }
    }

    #[test]
    fn constants_substitution_example() {
        // a = 4 * 0.3 * c * (3/4) = 1.2 c * 0.75 at (nu = 5, eta = 0.3).
        let k = skewt_constants(&params(5.0, 0.3)).unwrap();
        assert_abs_diff_eq!(k.a, 1.2 * k.c * 0.75, epsilon = 1e-15);
    }

    #[test]
    fn nu_boundary_is_rejected() {
        assert!(matches!(
            SkewTParams::new(2.0, 0.0),
            Err(DistError::InvalidParams(_))
        ));
        assert!(matches!(
            SkewTParams::new(5.0, 1.0),
            Err(DistError::InvalidParams(_))
        ));
    }

    #[test]
    fn pdf_symmetric_when_eta_zero() {
        let d = SkewT::new(params(6.0, 0.0)).unwrap();
        for &z in &[0.1, 0.75, 1.9, 4.2] {
            assert_abs_diff_eq!(d.pdf(z), d.pdf(-z), epsilon = 1e-15);
        }
    }

    #[test]
    fn pdf_mirror_identity_in_eta() {
        // pdf(z; nu, eta) = pdf(-z; nu, -eta).
        let d1 = SkewT::new(params(5.0, 0.3)).unwrap();
        let d2 = SkewT::new(params(5.0, -0.3)).unwrap();
        for &z in &[-2.5, -0.4, 0.0, 0.9, 3.3] {
            assert_abs_diff_eq!(d1.pdf(z), d2.pdf(-z), epsilon = 1e-15);
        }
    }

    #[test]
    fn pdf_continuous_at_kink() {
        let d = SkewT::new(params(5.0, 0.3)).unwrap();
        let k = d.kink();
        let below = d.pdf(k - 1e-12);
        let above = d.pdf(k + 1e-12);
        assert_abs_diff_eq!(below, above, epsilon = 1e-9);
    }

    #[test]
    fn cdf_at_kink_is_closed_form() {
        for &(nu, eta) in &[(5.0, 0.3), (3.0, -0.5), (8.0, 0.0), (30.0, 0.7)] {
            let d = SkewT::new(params(nu, eta)).unwrap();
            assert_abs_diff_eq!(d.cdf(d.kink()), 0.5 * (1.0 - eta), epsilon = 1e-13);
        }
    }

    #[test]
    fn cdf_symmetric_case_at_zero() {
        let d = SkewT::new(params(5.0, 0.0)).unwrap();
        assert_abs_diff_eq!(d.cdf(0.0), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn quantile_round_trip() {
        let d = SkewT::new(params(5.0, 0.3)).unwrap();
        for &p in &[0.01, 0.5, 0.99] {
            let z = d.quantile(p).unwrap();
            assert_abs_diff_eq!(d.cdf(z), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn quantile_symmetric_median_is_zero() {
        let d = SkewT::new(params(7.0, 0.0)).unwrap();
        assert_abs_diff_eq!(d.quantile(0.5).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quantile_matches_scaled_student_t() {
        // eta = 0 reduces to a variance-standardized t: q(p) = t_nu^{-1}(p) sqrt((nu-2)/nu).
        let d = SkewT::new(params(5.0, 0.0)).unwrap();
        let q = d.quantile(0.05).unwrap();
        assert_abs_diff_eq!(q, -1.5608497583442289, epsilon = 1e-9);
        let t = special::student_t_quantile(0.05, 5.0);
        assert_abs_diff_eq!(q, t * (3.0f64 / 5.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn quantile_normal_limit() {
        let d = SkewT::new(params(1e6, 0.0)).unwrap();
        assert_abs_diff_eq!(d.quantile(0.05).unwrap(), -1.6449, epsilon = 1e-3);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        let d = SkewT::new(params(5.0, 0.0)).unwrap();
        assert!(matches!(
            d.quantile(0.0),
            Err(DistError::ProbabilityOutOfRange(_))
        ));
        assert!(matches!(
            d.quantile(1.0),
            Err(DistError::ProbabilityOutOfRange(_))
        ));
    }

    #[test]
    fn student_t_round_trip_example() {
        let u = student_t_cdf(1.7, 7.0).unwrap();
        assert_abs_diff_eq!(student_t_quantile(u, 7.0).unwrap(), 1.7, epsilon = 1e-9);
    }

    #[test]
    fn student_t_cdf_examples() {
        assert_abs_diff_eq!(student_t_cdf(0.0, 3.7).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(student_t_cdf(1.0, 1.0).unwrap(), 0.75, epsilon = 1e-12);
    }
}

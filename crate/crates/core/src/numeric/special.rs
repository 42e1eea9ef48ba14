//! Scalar special functions: normal, chi-squared, and Student-t CDFs and
//! quantiles. Gamma/beta machinery comes from `statrs`; the Student-t
//! quantile is a safeguarded Newton inversion of the CDF so the pair are
//! mutual inverses to tight tolerance.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid standard normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile, polished with one Newton step so that
/// `normal_cdf(normal_quantile(p))` recovers `p` to machine precision.
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut x = std_normal().inverse_cdf(p);
    let d = normal_pdf(x);
    if d > 1e-280 {
        x -= (normal_cdf(x) - p) / d;
    }
    x
}

/// Upper tail probability of the chi-squared distribution with `k` degrees
/// of freedom.
pub fn chi_squared_sf(x: f64, k: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(k).expect("positive dof").sf(x)
}

/// Student-t CDF via the regularized incomplete beta function.
///
/// The two branches use the direct and complementary incomplete-beta forms
/// so the argument passed to `beta_reg` is always the small one; evaluating
/// near 1 loses ~6 digits for large `nu`.
pub fn student_t_cdf(x: f64, nu: f64) -> f64 {
    debug_assert!(nu > 0.0);
    if x == 0.0 {
        return 0.5;
    }
    let x2 = x * x;
    let half_tail = if x2 <= nu {
        let s = (x2 / (nu + x2)).clamp(0.0, 1.0);
        0.5 * (1.0 - beta_reg(0.5, 0.5 * nu, s))
    } else {
        let t = (nu / (nu + x2)).clamp(0.0, 1.0);
        0.5 * beta_reg(0.5 * nu, 0.5, t)
    };
    if x < 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

pub fn student_t_ln_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

pub fn student_t_pdf(x: f64, nu: f64) -> f64 {
    student_t_ln_pdf(x, nu).exp()
}

/// Student-t quantile by safeguarded Newton iteration on [`student_t_cdf`].
///
/// The starting point is the Cornish-Fisher expansion around the normal
/// quantile; a maintained bisection bracket guarantees convergence even for
/// small `nu` and extreme `p`.
pub fn student_t_quantile(p: f64, nu: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    debug_assert!(nu > 0.0);
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -student_t_quantile(1.0 - p, nu);
    }

    let z = normal_quantile(p);
    let g1 = (z.powi(3) + z) / 4.0;
    let g2 = (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / 96.0;
    let g3 = (3.0 * z.powi(7) + 19.0 * z.powi(5) + 17.0 * z.powi(3) - 15.0 * z) / 384.0;
    let mut x = z + g1 / nu + g2 / (nu * nu) + g3 / (nu * nu * nu);
    if !x.is_finite() || x < 0.0 {
        x = z.max(0.5);
    }

    // Establish a bracket [lo, hi] with cdf(lo) <= p <= cdf(hi).
    let mut lo = 0.0;
    let mut hi = x.max(1.0);
    let mut iter = 0;
    while student_t_cdf(hi, nu) < p {
        lo = hi;
        hi *= 4.0;
        iter += 1;
        if iter > 600 || hi > 1e300 {
            break;
        }
    }
    x = x.clamp(lo, hi);

    for _ in 0..60 {
        let err = student_t_cdf(x, nu) - p;
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if err.abs() < 1e-15 {
            break;
        }
        let d = student_t_pdf(x, nu);
        let mut next = x - err / d;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-14 * (1.0 + x.abs()) {
            x = next;
            break;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn t_cdf_cauchy_closed_form() {
        // nu = 1 is a Cauchy: F(x) = 1/2 + atan(x)/pi.
        for &x in &[-3.0f64, -1.0, 0.0, 0.5, 1.0, 4.0] {
            let expect = 0.5 + x.atan() / std::f64::consts::PI;
            assert_abs_diff_eq!(student_t_cdf(x, 1.0), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn t_quantile_round_trip() {
        for &nu in &[1.0, 2.0, 3.0, 5.0, 7.0, 12.0, 35.0, 1e6] {
            for &p in &[1e-6, 0.01, 0.05, 0.3, 0.5, 0.77, 0.95, 0.999, 1.0 - 1e-9] {
                let x = student_t_quantile(p, nu);
                // beta_reg carries ~1e-12 noise at very large nu; the
                // contract for the pair is 1e-10.
                assert_abs_diff_eq!(student_t_cdf(x, nu), p, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn t_quantile_reference_values() {
        // Classic t-table entries.
        assert_abs_diff_eq!(student_t_quantile(0.95, 5.0), 2.015, epsilon = 2e-3);
        assert_abs_diff_eq!(student_t_quantile(0.975, 10.0), 2.228, epsilon = 2e-3);
        assert_abs_diff_eq!(student_t_quantile(0.95, 1.0), 6.314, epsilon = 2e-3);
    }

    #[test]
    fn normal_quantile_round_trip() {
        for &p in &[1e-10, 0.025, 0.5, 0.8, 1.0 - 1e-10] {
            assert_abs_diff_eq!(normal_cdf(normal_quantile(p)), p, epsilon = 1e-14);
        }
    }

    #[test]
    fn chi_squared_sf_reference() {
        // P(chi2_2 > 5.991) = 0.05.
        assert_abs_diff_eq!(chi_squared_sf(5.991464547107979, 2.0), 0.05, epsilon = 1e-12);
    }
}

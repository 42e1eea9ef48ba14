//! Central finite-difference Hessian and standard errors from its inverse.

use nalgebra::DMatrix;

/// Central finite-difference Hessian of `f` at `x` with relative step `rel_step`.
pub fn central_hessian<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    rel_step: f64,
) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x
        .iter()
        .map(|xi| rel_step * (1.0 + xi.abs()))
        .collect();
    let mut m = DMatrix::zeros(n, n);
    let f0 = f(x);
    let mut buf = x.to_vec();
    for i in 0..n {
        // Diagonal: (f(x+h) - 2 f(x) + f(x-h)) / h^2.
        buf.copy_from_slice(x);
        buf[i] = x[i] + h[i];
        let fp = f(&buf);
        buf[i] = x[i] - h[i];
        let fm = f(&buf);
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..n {
            buf.copy_from_slice(x);
            buf[i] = x[i] + h[i];
            buf[j] = x[j] + h[j];
            let fpp = f(&buf);
            buf[j] = x[j] - h[j];
            let fpm = f(&buf);
            buf[i] = x[i] - h[i];
            buf[j] = x[j] + h[j];
            let fmp = f(&buf);
            buf[j] = x[j] - h[j];
            let fmm = f(&buf);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Standard errors as sqrt of the diagonal of the inverse Hessian.
///
/// Returns `None` per parameter when the Hessian is singular, not positive
/// on the diagonal of the inverse, or non-finite.
pub fn std_errors_from_hessian(hess: &DMatrix<f64>) -> Vec<Option<f64>> {
    let n = hess.nrows();
    if hess.iter().any(|v| !v.is_finite()) {
        return vec![None; n];
    }
    match hess.clone().try_inverse() {
        Some(inv) => (0..n)
            .map(|i| {
                let v = inv[(i, i)];
                if v.is_finite() && v > 0.0 {
                    Some(v.sqrt())
                } else {
                    None
                }
            })
            .collect(),
        None => vec![None; n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_hessian_is_exact() {
        // f = x^2 + 3xy + 5y^2 has Hessian [[2, 3], [3, 10]].
        let h = central_hessian(
            |v| v[0] * v[0] + 3.0 * v[0] * v[1] + 5.0 * v[1] * v[1],
            &[0.7, -0.3],
            1e-4,
        );
        assert_abs_diff_eq!(h[(0, 0)], 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(h[(0, 1)], 3.0, epsilon = 1e-5);
        assert_abs_diff_eq!(h[(1, 1)], 10.0, epsilon = 1e-5);
    }

    #[test]
    fn singular_hessian_reports_missing() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(std_errors_from_hessian(&h), vec![None, None]);
    }
}

//! Adaptive Simpson quadrature and Gauss-Legendre nodes.

use std::sync::OnceLock;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Interval too narrow to split further in f64.
    if depth == 0 || delta.abs() <= 15.0 * tol || m <= a || b <= m {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrates `f` over the whole real line via the substitution
/// `x = t / (1 - t^2)`, which maps `(-1, 1)` onto the line and keeps
/// polynomially decaying tails bounded in the transformed variable.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: &F, tol: f64) -> f64 {
    let g = |t: f64| {
        let s = 1.0 - t * t;
        let x = t / s;
        let jac = (1.0 + t * t) / (s * s);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let eps = 1e-12;
    adaptive_simpson(&g, -1.0 + eps, 1.0 - eps, tol)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre polynomial roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative by upward recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// 128-point Gauss-Legendre rule rescaled to `(0, 1)`, cached for reuse.
pub fn gauss_legendre_unit_128() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(128);
        let nodes = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let weights = w.iter().map(|wi| 0.5 * wi).collect();
        (nodes, weights)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_integrates_polynomial() {
        let v = adaptive_simpson(&|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn real_line_gaussian() {
        let inv_sqrt_2pi = 0.3989422804014327;
        let v = integrate_real_line(&|x| inv_sqrt_2pi * (-0.5 * x * x).exp(), 1e-12);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gauss_legendre_exactness() {
        // A 4-point rule integrates degree-7 polynomials exactly.
        let (x, w) = gauss_legendre(4);
        let v: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * (xi.powi(6) + xi.powi(3)))
            .sum();
        assert_abs_diff_eq!(v, 2.0 / 7.0, epsilon = 1e-13);
    }

    #[test]
    fn gauss_legendre_unit_weights_sum_to_one() {
        let (_, w) = gauss_legendre_unit_128();
        let s: f64 = w.iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }
}

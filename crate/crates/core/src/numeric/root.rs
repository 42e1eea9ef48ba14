//! Bracketed scalar root finding.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootError {
    /// `f(lo)` and `f(hi)` have the same sign.
    NotBracketed,
}

/// Bisection on a monotone-sign-change bracket `[lo, hi]`.
///
/// Stops when the bracket width falls below `tol_x` or after `max_iter`
/// halvings, returning the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    tol_x: f64,
    max_iter: usize,
) -> Result<f64, RootError> {
    let mut a = lo;
    let mut b = hi;
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed);
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if b - a < tol_x || mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == neg_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = bisect(&|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbracketed() {
        assert_eq!(
            bisect(&|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100),
            Err(RootError::NotBracketed)
        );
    }
}

//! Derivative-free Nelder-Mead simplex minimizer.
//!
//! The likelihood surfaces optimized here have cliffs near reparameterized
//! constraint boundaries, so the implementation favours robustness: standard
//! reflection/expansion/contraction coefficients, a shrink fallback, and
//! convergence on both function spread and simplex diameter.

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_evals: usize,
    pub tol_f: f64,
    pub tol_x: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            tol_f: 1e-10,
            tol_x: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fval: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`, building the initial simplex with per-coordinate
/// offsets `step`. Non-finite objective values are treated as +inf.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    opts: &NmOptions,
) -> NmResult {
    assert_eq!(x0.len(), step.len());
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if step[i] != 0.0 { step[i] } else { 1e-4 };
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = fvals[worst] - fvals[best];
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= opts.tol_f * (1.0 + fvals[best].abs()))
            || diameter <= opts.tol_x
        {
            converged = fvals[best].is_finite();
            break;
        }

        // Centroid of all vertices but the worst.
        let mut centroid = vec![0.0; n];
        for (i, v) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[worst])
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = eval(&reflect, &mut evals);

        if f_reflect < fvals[best] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let f_expand = eval(&expand, &mut evals);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                fvals[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                fvals[worst] = f_reflect;
            }
        } else if f_reflect < fvals[second_worst] {
            simplex[worst] = reflect;
            fvals[worst] = f_reflect;
        } else {
            // Contract toward the better of worst/reflected.
            let (toward, f_toward) = if f_reflect < fvals[worst] {
                (&reflect, f_reflect)
            } else {
                (&simplex[worst], fvals[worst])
            };
            let contract: Vec<f64> = centroid
                .iter()
                .zip(toward)
                .map(|(c, w)| c + rho * (w - c))
                .collect();
            let f_contract = eval(&contract, &mut evals);
            if f_contract < f_toward {
                simplex[worst] = contract;
                fvals[worst] = f_contract;
            } else {
                // Shrink toward the best vertex.
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for (v, b) in simplex[i].iter_mut().zip(&best_point) {
                        *v = b + sigma * (*v - b);
                    }
                    fvals[i] = eval(&simplex[i].clone(), &mut evals);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if fvals[i] < fvals[best] {
            best = i;
        }
    }
    NmResult {
        x: simplex[best].clone(),
        fval: fvals[best],
        evals,
        converged: converged && fvals[best].is_finite(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let r = nelder_mead(
            |x| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2),
            &[0.0, 0.0],
            &[0.5, 0.5],
            &NmOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-5, "x0 = {}", r.x[0]);
        assert!((r.x[1] + 1.0).abs() < 1e-5, "x1 = {}", r.x[1]);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let r = nelder_mead(
            |x| {
                let a = 1.0 - x[0];
                let b = x[1] - x[0] * x[0];
                a * a + 100.0 * b * b
            },
            &[-1.2, 1.0],
            &[0.1, 0.1],
            &NmOptions {
                max_evals: 5000,
                ..Default::default()
            },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn survives_infinite_regions() {
        // Objective is +inf on half the plane; NM must still find the valley.
        let r = nelder_mead(
            |x| {
                if x[0] <= 0.0 {
                    f64::INFINITY
                } else {
                    (x[0].ln()).powi(2) + x[1] * x[1]
                }
            },
            &[2.0, 1.0],
            &[0.5, 0.5],
            &NmOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4);
    }
}

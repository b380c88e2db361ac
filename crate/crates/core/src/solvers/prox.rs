//! Accelerated proximal gradient (FISTA) and the one-sided soft threshold.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ForwardOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxBudget {
    pub max_iters: usize,
    /// Stop when `||x_k - x_{k-1}|| <= tol * max(1, ||x_k||)`.
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct ProxSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f(x) + g(x)` with `f` smooth (`lipschitz`-smooth gradient
/// `grad`) and `g` handled by `prox(v, step)`, which must overwrite `v` with
/// `prox_{step * g}(v)`.
pub fn accelerated_proximal_gradient<G, P>(
    mut grad: G,
    prox: P,
    x0: Vec<f64>,
    lipschitz: f64,
    budget: ProxBudget,
) -> Result<ProxSolution>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&mut [f64], f64),
{
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    let step = 1.0 / lipschitz;
    let mut x_prev = x0;
    let mut y = x_prev.clone();
    let mut t = 1.0_f64;
    for k in 1..=budget.max_iters {
        let g = grad(&y)?;
        let mut x: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / lipschitz).collect();
        prox(&mut x, step);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("proximal gradient iterate"));
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        let mut diff = 0.0;
        let mut size = 0.0;
        for ((yi, xi), pi) in y.iter_mut().zip(&x).zip(&x_prev) {
            let d = xi - pi;
            diff += d * d;
            size += xi * xi;
            *yi = xi + momentum * d;
        }
        x_prev = x;
        t = t_next;
        if diff.sqrt() <= budget.tol * size.sqrt().max(1.0) {
            return Ok(ProxSolution {
                x: x_prev,
                iterations: k,
                converged: true,
            });
        }
    }
    Ok(ProxSolution {
        x: x_prev,
        iterations: budget.max_iters,
        converged: false,
    })
}

/// `prox` of `threshold * ||x||_1` restricted to `x >= 0`:
/// `x <- max(x - threshold, 0)`.
pub fn nonneg_soft_threshold(x: &mut [f64], threshold: f64) {
    for v in x {
        *v = (*v - threshold).max(0.0);
    }
}

/// Largest eigenvalue of `A^H A` by power iteration, from a fixed start.
pub fn gram_spectral_norm(op: &ForwardOperator, iterations: usize) -> Result<f64> {
    let n = op.image_len();
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05))
        .collect();
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nv == 0.0 {
            return Ok(0.0);
        }
        for z in &mut v {
            *z /= nv;
        }
        let w = op.normal(&v)?;
        estimate = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        v = w;
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_is_one_sided() {
        let mut v = vec![-1.0, 0.1, 0.5, 2.0];
        nonneg_soft_threshold(&mut v, 0.25);
        assert_eq!(v, vec![0.0, 0.0, 0.25, 1.75]);
    }

    #[test]
    fn solves_a_small_nonneg_lasso() {
        // f(x) = 0.5 ||D x - b||^2 with D = diag(1, 2, 4); g = 0.5 ||x||_1, x >= 0
        let d = [1.0, 2.0, 4.0];
        let b = [3.0, -1.0, 2.0];
        let sol = accelerated_proximal_gradient(
            |x| Ok(x.iter().zip(&d).zip(&b).map(|((xi, di), bi)| di * (di * xi - bi)).collect()),
            |v, step| nonneg_soft_threshold(v, 0.5 * step),
            vec![0.0; 3],
            16.0,
            ProxBudget {
                max_iters: 5000,
                tol: 1e-12,
            },
        )
        .unwrap();
        assert!(sol.converged);
        // per coordinate: max((d b - 0.5) / d^2, 0)
        let expect = [2.5, 0.0, (8.0 - 0.5) / 16.0];
        for (x, e) in sol.x.iter().zip(expect) {
            assert!((x - e).abs() < 1e-9, "{x} vs {e}");
        }
    }

    #[test]
    fn rejects_bad_lipschitz() {
        let r = accelerated_proximal_gradient(
            |x| Ok(x.to_vec()),
            |_, _| {},
            vec![0.0],
            0.0,
            ProxBudget {
                max_iters: 1,
                tol: 1e-6,
            },
        );
        assert!(r.is_err());
    }
}

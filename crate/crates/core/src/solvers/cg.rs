//! Conjugate gradient for the regularized normal system
//! `(mu A^H A + beta I) v = rhs`.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::model::ForwardOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgBudget {
    pub max_iters: usize,
    /// Relative residual target `||rhs - M v|| <= tol * ||rhs||`.
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgTermination {
    Tolerance,
    Budget,
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// True (not recursively updated) residual norm of the returned iterate.
    pub residual_norm: f64,
    pub termination: CgTermination,
}

/// Solves `(mu A^H A + beta I) v = rhs` from the zero vector.
pub fn cg_solve(
    op: &ForwardOperator,
    mu: f64,
    beta: f64,
    rhs: &[Complex64],
    budget: CgBudget,
) -> Result<CgSolution> {
    cg_solve_from(op, mu, beta, rhs, None, budget)
}

/// Like [`cg_solve`] with an optional starting point.
pub fn cg_solve_from(
    op: &ForwardOperator,
    mu: f64,
    beta: f64,
    rhs: &[Complex64],
    x0: Option<&[Complex64]>,
    budget: CgBudget,
) -> Result<CgSolution> {
    let n = op.image_len();
    check_len("cg right-hand side", n, rhs.len())?;
    if !(mu > 0.0 && beta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cg requires mu > 0 and beta > 0, got mu={mu}, beta={beta}"
        )));
    }
    if rhs.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("cg right-hand side"));
    }
    let system = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let mut out = op.normal(v)?;
        for (o, vi) in out.iter_mut().zip(v) {
            *o = *o * mu + vi * beta;
        }
        Ok(out)
    };
    let residual = |x: &[Complex64]| -> Result<Vec<Complex64>> {
        Ok(system(x)?
            .iter()
            .zip(rhs)
            .map(|(mx, b)| b - mx)
            .collect())
    };

    let b_norm = norm_sqr(rhs).sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![Complex64::new(0.0, 0.0); n],
            iterations: 0,
            residual_norm: 0.0,
            termination: CgTermination::Tolerance,
        });
    }
    let target = budget.tol * b_norm;

    let (mut x, mut r) = match x0 {
        Some(x0) => {
            check_len("cg initial guess", n, x0.len())?;
            let x = x0.to_vec();
            let r = residual(&x)?;
            (x, r)
        }
        None => (vec![Complex64::new(0.0, 0.0); n], rhs.to_vec()),
    };
    let mut p = r.clone();
    let mut rs = norm_sqr(&r);
    let mut iterations = 0;

    loop {
        if rs.sqrt() <= target {
            // confirm against the true residual; restart if drift crept in
            let true_r = residual(&x)?;
            let true_norm = norm_sqr(&true_r).sqrt();
            if true_norm <= target {
                return Ok(CgSolution {
                    x,
                    iterations,
                    residual_norm: true_norm,
                    termination: CgTermination::Tolerance,
                });
            }
            r = true_r;
            rs = true_norm * true_norm;
            p.clone_from(&r);
        }
        if iterations >= budget.max_iters {
            break;
        }
        let mp = system(&p)?;
        let curvature: f64 = p.iter().zip(&mp).map(|(a, b)| (a.conj() * b).re).sum();
        if !(curvature > 0.0) {
            break;
        }
        let alpha = rs / curvature;
        for ((xi, ri), (pi, mpi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&mp)) {
            *xi += pi * alpha;
            *ri -= mpi * alpha;
        }
        let rs_next = norm_sqr(&r);
        let ratio = rs_next / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + *pi * ratio;
        }
        rs = rs_next;
        iterations += 1;
    }

    let residual_norm = norm_sqr(&residual(&x)?).sqrt();
    Ok(CgSolution {
        x,
        iterations,
        residual_norm,
        termination: if residual_norm <= target {
            CgTermination::Tolerance
        } else {
            CgTermination::Budget
        },
    })
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

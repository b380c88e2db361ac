//! Composite imaging baseline: independent sparse reconstruction per
//! cluster followed by pixel-wise maximum fusion.

use num_complex::Complex64;

use super::prox::{accelerated_proximal_gradient, gram_spectral_norm, nonneg_soft_threshold, ProxBudget};
use crate::error::{check_len, Error, Result};
use crate::model::ForwardOperator;

const POWER_ITERATIONS: usize = 100;
const LIPSCHITZ_MARGIN: f64 = 1.1;

/// `argmin_{x >= 0} ||y - A x||^2 + lambda_c ||x||_1` over real `x`, by
/// accelerated proximal gradient from zero.
pub fn sparse_reconstruction(
    op: &ForwardOperator,
    y: &[Complex64],
    lambda_c: f64,
    budget: ProxBudget,
) -> Result<Vec<f64>> {
    if !(lambda_c.is_finite() && lambda_c >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "composite lambda must be nonnegative, got {lambda_c}"
        )));
    }
    let backprojection = op.adjoint(y)?;
    let n = op.image_len();
    let lipschitz = 2.0 * LIPSCHITZ_MARGIN * gram_spectral_norm(op, POWER_ITERATIONS)?;
    if lipschitz == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let sol = accelerated_proximal_gradient(
        |x| {
            let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let gram = op.normal(&xc)?;
            Ok(gram
                .iter()
                .zip(&backprojection)
                .map(|(g, b)| 2.0 * (g.re - b.re))
                .collect())
        },
        |v, step| nonneg_soft_threshold(v, lambda_c * step),
        vec![0.0; n],
        lipschitz,
        budget,
    )?;
    Ok(sol.x)
}

/// Per-cluster sparse reconstructions fused by pixel-wise maximum.
pub fn composite_baseline(
    operators: &[ForwardOperator],
    measurements: &[Vec<Complex64>],
    lambda_c: f64,
    budget: ProxBudget,
) -> Result<Vec<f64>> {
    let first = operators.first().ok_or(Error::Empty("operator list"))?;
    check_len("measurement list", operators.len(), measurements.len())?;
    let mut fused = vec![0.0_f64; first.image_len()];
    for (op, y) in operators.iter().zip(measurements) {
        check_len("operator image length", fused.len(), op.image_len())?;
        let local = sparse_reconstruction(op, y, lambda_c, budget)?;
        for (f, v) in fused.iter_mut().zip(local) {
            *f = f.max(v);
        }
    }
    Ok(fused)
}

//! Consensus and sharing ADMM engines.
//!
//! Both engines minimize
//!
//! ```text
//! sum_q (mu/2) ||y_q - A_q x_q||^2 + lambda ||x_G||_1
//! ```
//!
//! over magnitude images, with the coupling `x_q = x_G` (consensus) or
//! `sum_q x_q = x_G` (sharing). All updates follow from the augmented
//! Lagrangians `<sigma_q, x_q - x_G>` and `<sigma, x_bar - x_G>`, so the dual
//! term enters the global subproblems as `-sigma^T x_G`.
//!
//! Every reduction over clusters runs in ascending `q`, and local updates
//! only read iteration-`k` state, so results do not depend on how local
//! updates are scheduled.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::cg::cg_solve_from;
use super::prox::{accelerated_proximal_gradient, nonneg_soft_threshold, ProxSolution};
use super::{Method, SolverConfig};
use crate::error::{check_len, Error, Result};
use crate::model::ForwardOperator;

/// One cluster's operator and data, with `A^H y` cached.
#[derive(Debug, Clone)]
pub struct ClusterProblem<'a> {
    op: &'a ForwardOperator,
    y: &'a [Complex64],
    backprojection: Vec<Complex64>,
}

impl<'a> ClusterProblem<'a> {
    pub fn new(op: &'a ForwardOperator, y: &'a [Complex64]) -> Result<Self> {
        let backprojection = op.adjoint(y)?;
        Ok(Self {
            op,
            y,
            backprojection,
        })
    }

    pub fn operator(&self) -> &ForwardOperator {
        self.op
    }

    pub fn image_len(&self) -> usize {
        self.op.image_len()
    }

    /// CG solve of `(mu A^H A + beta I) v = rhs`, projected onto the real
    /// nonnegative orthant.
    fn solve_projected(
        &self,
        rhs: Vec<Complex64>,
        warm: Option<&[f64]>,
        cfg: &SolverConfig,
    ) -> Result<Vec<f64>> {
        let x0: Option<Vec<Complex64>> =
            warm.map(|w| w.iter().map(|&v| Complex64::new(v, 0.0)).collect());
        let sol = cg_solve_from(
            self.op,
            cfg.mu,
            cfg.beta,
            &rhs,
            x0.as_deref(),
            cfg.cg_budget(),
        )?;
        Ok(sol.x.iter().map(|z| z.re.max(0.0)).collect())
    }

    /// Consensus local update
    /// `max(Re[(mu A^H A + beta I)^-1 (mu A^H y + beta x_G - sigma_q)], 0)`.
    pub fn local_update_cadmm(
        &self,
        x_g: &[f64],
        sigma_q: &[f64],
        warm: Option<&[f64]>,
        cfg: &SolverConfig,
    ) -> Result<Vec<f64>> {
        let n = self.image_len();
        check_len("global image", n, x_g.len())?;
        check_len("dual block", n, sigma_q.len())?;
        let rhs = self
            .backprojection
            .iter()
            .zip(x_g)
            .zip(sigma_q)
            .map(|((b, &g), &s)| b * cfg.mu + Complex64::new(cfg.beta * g - s, 0.0))
            .collect();
        self.solve_projected(rhs, warm, cfg)
    }

    /// Sharing local update; `x_bar_prev` is the sum of all local images at
    /// iteration `k` and `x_q_prev` this cluster's own iteration-`k` image.
    pub fn local_update_sadmm(
        &self,
        x_g: &[f64],
        x_bar_prev: &[f64],
        x_q_prev: &[f64],
        sigma: &[f64],
        cfg: &SolverConfig,
    ) -> Result<Vec<f64>> {
        let n = self.image_len();
        check_len("global image", n, x_g.len())?;
        check_len("image sum", n, x_bar_prev.len())?;
        check_len("previous local image", n, x_q_prev.len())?;
        check_len("dual variable", n, sigma.len())?;
        let rhs = self
            .backprojection
            .iter()
            .zip(x_g)
            .zip(x_bar_prev.iter().zip(x_q_prev))
            .zip(sigma)
            .map(|(((b, &g), (&sum, &own)), &s)| {
                b * cfg.mu + Complex64::new(cfg.beta * (g - (sum - own)) - s, 0.0)
            })
            .collect();
        let warm = cfg.warm_start.then_some(x_q_prev);
        self.solve_projected(rhs, warm, cfg)
    }

    /// `||y - A x||^2`
    pub fn misfit(&self, x: &[f64]) -> Result<f64> {
        let ax = self.op.apply_real(x)?;
        Ok(ax
            .iter()
            .zip(self.y)
            .map(|(a, y)| (y - a).norm_sqr())
            .sum())
    }
}

/// Consensus local update from raw operator and measurements.
pub fn local_update_cadmm(
    op: &ForwardOperator,
    y: &[Complex64],
    x_g: &[f64],
    sigma_q: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    ClusterProblem::new(op, y)?.local_update_cadmm(x_g, sigma_q, None, cfg)
}

/// Sharing local update from raw operator and measurements.
pub fn local_update_sadmm(
    op: &ForwardOperator,
    y: &[Complex64],
    x_g: &[f64],
    x_bar_prev: &[f64],
    x_q_prev: &[f64],
    sigma: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    ClusterProblem::new(op, y)?.local_update_sadmm(x_g, x_bar_prev, x_q_prev, sigma, cfg)
}

/// `sum_q x_q`, accumulated in ascending `q`.
pub fn sum_images(images: &[Vec<f64>]) -> Vec<f64> {
    let n = images.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for img in images {
        for (o, v) in out.iter_mut().zip(img) {
            *o += v;
        }
    }
    out
}

/// Minimizes `(L/2)||z||^2 - b^T z + lambda ||z||_1` over `z >= 0` with the
/// accelerated proximal gradient, starting from zero.
fn solve_global(b: Vec<f64>, lipschitz: f64, cfg: &SolverConfig) -> Result<ProxSolution> {
    let n = b.len();
    let lambda = cfg.lambda;
    accelerated_proximal_gradient(
        |z| Ok(z.iter().zip(&b).map(|(zi, bi)| lipschitz * zi - bi).collect()),
        |v, step| nonneg_soft_threshold(v, lambda * step),
        vec![0.0; n],
        lipschitz,
        cfg.prox_budget(),
    )
}

/// Consensus global update: minimizer over `z >= 0` of
/// `lambda ||z||_1 - sum_q sigma_q^T z + (beta/2) sum_q ||x_q - z||^2`.
pub fn global_update_cadmm(
    local_images: &[Vec<f64>],
    sigma: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let q = local_images.len();
    if q == 0 {
        return Err(Error::Empty("local image list"));
    }
    let n = local_images[0].len();
    check_len("stacked dual variable", q * n, sigma.len())?;
    let mut b = vec![0.0; n];
    for (x_q, s_q) in local_images.iter().zip(sigma.chunks_exact(n)) {
        check_len("local image", n, x_q.len())?;
        for ((bi, &x), &s) in b.iter_mut().zip(x_q).zip(s_q) {
            *bi += cfg.beta * x + s;
        }
    }
    Ok(solve_global(b, q as f64 * cfg.beta, cfg)?.x)
}

/// Sharing global update: minimizer over `z >= 0` of
/// `lambda ||z||_1 + (beta/2) ||z - x_bar||^2 - sigma^T z`.
pub fn global_update_sadmm(x_bar: &[f64], sigma: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    check_len("dual variable", x_bar.len(), sigma.len())?;
    let b = x_bar
        .iter()
        .zip(sigma)
        .map(|(&x, &s)| cfg.beta * x + s)
        .collect();
    Ok(solve_global(b, cfg.beta, cfg)?.x)
}

/// `sigma_q += beta (x_q - x_G)` for every block.
pub fn dual_update_cadmm(sigma: &mut [f64], local_images: &[Vec<f64>], x_g: &[f64], beta: f64) {
    let n = x_g.len();
    for (s_q, x_q) in sigma.chunks_exact_mut(n).zip(local_images) {
        for ((s, &x), &g) in s_q.iter_mut().zip(x_q).zip(x_g) {
            *s += beta * (x - g);
        }
    }
}

/// `sigma += beta (x_bar - x_G)`.
pub fn dual_update_sadmm(sigma: &mut [f64], x_bar: &[f64], x_g: &[f64], beta: f64) {
    for ((s, &x), &g) in sigma.iter_mut().zip(x_bar).zip(x_g) {
        *s += beta * (x - g);
    }
}

/// Residual norms and feasibility tolerances of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub primal_norm: f64,
    pub dual_norm: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
}

impl Residuals {
    pub fn satisfied(&self) -> bool {
        self.primal_norm <= self.eps_pri && self.dual_norm <= self.eps_dual
    }
}

/// Residuals of `state` (already at iteration `k+1`) given the previous
/// global image.
///
/// Dual residual `beta (x_G^{k+1} - x_G^k)` for both methods. Consensus:
/// primal `x - 1_Q (x) x_G` over the stacked `QN` vector,
/// `eps_pri = sqrt(QN) eps_abs + eps_rel max(||x||, sqrt(Q) ||x_G||)`,
/// `eps_dual = sqrt(QN) eps_abs + eps_rel ||sigma||`. Sharing: primal
/// `x_bar - x_G`, `eps_pri = sqrt(N) eps_abs + eps_rel max(||x_bar||, ||x_G||)`,
/// `eps_dual = sqrt(N) eps_abs + eps_rel ||sigma||`.
pub fn residuals(
    method: Method,
    prev_global: &[f64],
    state: &SolverState,
    cfg: &SolverConfig,
) -> Residuals {
    let x_g = &state.global_image;
    let n = x_g.len();
    let q = state.local_images.len();
    let dual_norm = cfg.beta * norm(x_g.iter().zip(prev_global).map(|(a, b)| a - b));
    let sigma_norm = norm(state.dual.iter().copied());
    let g_norm = norm(x_g.iter().copied());
    match method {
        Method::Cadmm => {
            let primal_norm = norm(
                state
                    .local_images
                    .iter()
                    .flat_map(|x_q| x_q.iter().zip(x_g).map(|(a, b)| a - b)),
            );
            let x_norm = norm(state.local_images.iter().flatten().copied());
            let scale = ((q * n) as f64).sqrt() * cfg.eps_abs;
            Residuals {
                primal_norm,
                dual_norm,
                eps_pri: scale + cfg.eps_rel * x_norm.max((q as f64).sqrt() * g_norm),
                eps_dual: scale + cfg.eps_rel * sigma_norm,
            }
        }
        Method::Sadmm => {
            let x_bar = sum_images(&state.local_images);
            let primal_norm = norm(x_bar.iter().zip(x_g).map(|(a, b)| a - b));
            let bar_norm = norm(x_bar.iter().copied());
            let scale = (n as f64).sqrt() * cfg.eps_abs;
            Residuals {
                primal_norm,
                dual_norm,
                eps_pri: scale + cfg.eps_rel * bar_norm.max(g_norm),
                eps_dual: scale + cfg.eps_rel * sigma_norm,
            }
        }
    }
}

fn norm(values: impl Iterator<Item = f64>) -> f64 {
    values.map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal_norm: f64,
    pub dual_norm: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub objective: f64,
    pub wall_ms: f64,
}

impl IterationRecord {
    pub fn residuals(&self) -> Residuals {
        Residuals {
            primal_norm: self.primal_norm,
            dual_norm: self.dual_norm,
            eps_pri: self.eps_pri,
            eps_dual: self.eps_dual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub method: Method,
    /// `x_q`, one nonnegative image per cluster.
    pub local_images: Vec<Vec<f64>>,
    /// `x_G`
    pub global_image: Vec<f64>,
    /// `sigma`: `Q * N` (blocks in cluster order) for consensus, `N` for
    /// sharing.
    pub dual: Vec<f64>,
    pub iter: usize,
    pub residual_log: Vec<IterationRecord>,
}

impl SolverState {
    /// All-zero starting point.
    pub fn zeros(method: Method, clusters: usize, n: usize) -> Self {
        let dual_len = match method {
            Method::Cadmm => clusters * n,
            Method::Sadmm => n,
        };
        Self {
            method,
            local_images: vec![vec![0.0; n]; clusters],
            global_image: vec![0.0; n],
            dual: vec![0.0; dual_len],
            iter: 0,
            residual_log: Vec::new(),
        }
    }

    /// Applies the method's dual ascent step using the current images.
    pub fn update_dual(&mut self, beta: f64) {
        match self.method {
            Method::Cadmm => {
                dual_update_cadmm(&mut self.dual, &self.local_images, &self.global_image, beta)
            }
            Method::Sadmm => {
                let x_bar = sum_images(&self.local_images);
                dual_update_sadmm(&mut self.dual, &x_bar, &self.global_image, beta)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub state: SolverState,
    pub termination: Termination,
    /// `sum_q (mu/2) ||y_q - A_q x_q||^2 + lambda ||x_G||_1` per iteration.
    pub objective_history: Vec<f64>,
}

impl ReconstructionResult {
    pub fn iterations(&self) -> usize {
        self.state.iter
    }

    pub fn global_image(&self) -> &[f64] {
        &self.state.global_image
    }
}

pub(crate) fn validate_inputs(
    operators: &[ForwardOperator],
    measurements: &[Vec<Complex64>],
    cfg: &SolverConfig,
) -> Result<usize> {
    cfg.validate()?;
    let first = operators.first().ok_or(Error::Empty("operator list"))?;
    check_len("measurement list", operators.len(), measurements.len())?;
    let n = first.image_len();
    for (op, y) in operators.iter().zip(measurements) {
        check_len("operator image length", n, op.image_len())?;
        check_len("measurement vector", op.measurement_len(), y.len())?;
    }
    Ok(n)
}

/// Finishes one outer iteration after the local images have been replaced:
/// global update, dual update, residual check and logging. Returns `true`
/// once the stopping rule holds.
pub(crate) fn finish_iteration(
    state: &mut SolverState,
    misfits: &[f64],
    cfg: &SolverConfig,
    started: Instant,
) -> Result<bool> {
    let prev_global = std::mem::take(&mut state.global_image);
    state.global_image = match state.method {
        Method::Cadmm => global_update_cadmm(&state.local_images, &state.dual, cfg)?,
        Method::Sadmm => {
            global_update_sadmm(&sum_images(&state.local_images), &state.dual, cfg)?
        }
    };
    state.update_dual(cfg.beta);
    state.iter += 1;

    let res = residuals(state.method, &prev_global, state, cfg);
    let data: f64 = misfits.iter().map(|m| 0.5 * cfg.mu * m).sum();
    let objective = data + cfg.lambda * state.global_image.iter().sum::<f64>();
    if !objective.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    state.residual_log.push(IterationRecord {
        iter: state.iter,
        primal_norm: res.primal_norm,
        dual_norm: res.dual_norm,
        eps_pri: res.eps_pri,
        eps_dual: res.eps_dual,
        objective,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    });
    Ok(res.satisfied())
}

/// Runs the chosen engine from the all-zero state.
///
/// `operators` must already carry their phase matrices. Local updates run
/// on the current rayon pool; results do not depend on its size.
pub fn run(
    method: Method,
    operators: &[ForwardOperator],
    measurements: &[Vec<Complex64>],
    cfg: &SolverConfig,
) -> Result<ReconstructionResult> {
    let n = validate_inputs(operators, measurements, cfg)?;
    let problems: Vec<ClusterProblem> = operators
        .iter()
        .zip(measurements)
        .map(|(op, y)| ClusterProblem::new(op, y))
        .collect::<Result<_>>()?;
    let mut state = SolverState::zeros(method, problems.len(), n);
    let mut termination = Termination::MaxIters;

    for _ in 0..cfg.max_outer_iters {
        let started = Instant::now();
        let x_bar = match method {
            Method::Sadmm => sum_images(&state.local_images),
            Method::Cadmm => Vec::new(),
        };
        let updates: Vec<(Vec<f64>, f64)> = problems
            .par_iter()
            .enumerate()
            .map(|(q, p)| {
                let x_prev = &state.local_images[q];
                let warm = cfg.warm_start.then_some(x_prev.as_slice());
                let x = match method {
                    Method::Cadmm => p.local_update_cadmm(
                        &state.global_image,
                        &state.dual[q * n..(q + 1) * n],
                        warm,
                        cfg,
                    )?,
                    Method::Sadmm => p.local_update_sadmm(
                        &state.global_image,
                        &x_bar,
                        x_prev,
                        &state.dual,
                        cfg,
                    )?,
                };
                let misfit = p.misfit(&x)?;
                Ok((x, misfit))
            })
            .collect::<Result<_>>()?;
        let (locals, misfits): (Vec<_>, Vec<_>) = updates.into_iter().unzip();
        state.local_images = locals;
        if finish_iteration(&mut state, &misfits, cfg, started)? {
            termination = Termination::Converged;
            break;
        }
    }

    let objective_history = state.residual_log.iter().map(|r| r.objective).collect();
    Ok(ReconstructionResult {
        state,
        termination,
        objective_history,
    })
}

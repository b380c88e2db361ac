//! Optimization machinery: CG inner solves, proximal gradient, the consensus
//! and sharing ADMM engines, and the composite (per-cluster + fusion)
//! baseline.

pub(crate) mod admm;
mod cg;
mod composite;
mod prox;

use std::fmt;
use std::str::FromStr;

pub use admm::{
    dual_update_cadmm, dual_update_sadmm, global_update_cadmm, global_update_sadmm,
    local_update_cadmm, local_update_sadmm, residuals, run, sum_images, ClusterProblem,
    IterationRecord, ReconstructionResult, Residuals, SolverState, Termination,
};
pub use cg::{cg_solve, cg_solve_from, CgBudget, CgSolution, CgTermination};
pub use composite::{composite_baseline, sparse_reconstruction};
pub use prox::{
    accelerated_proximal_gradient, gram_spectral_norm, nonneg_soft_threshold, ProxBudget,
    ProxSolution,
};

use crate::error::{Error, Result};

/// Constraint linking local and global images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Consensus: `x_q = x_G` for every cluster.
    Cadmm,
    /// Sharing: `sum_q x_q = x_G`.
    Sadmm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cadmm => "cadmm",
            Method::Sadmm => "sadmm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cadmm" => Ok(Method::Cadmm),
            "sadmm" => Ok(Method::Sadmm),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Data-fidelity weight.
    pub mu: f64,
    /// Sparsity weight on the global image.
    pub lambda: f64,
    /// Augmented Lagrangian parameter.
    pub beta: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_outer_iters: usize,
    pub cg_max_iters: usize,
    pub cg_tol: f64,
    pub prox_max_iters: usize,
    pub prox_tol: f64,
    pub method: Method,
    /// Start each CG solve from the cluster's previous local image instead
    /// of zero.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 1.0,
            beta: 10.0,
            eps_abs: 1e-2,
            eps_rel: 1e-2,
            max_outer_iters: 100,
            cg_max_iters: 50,
            cg_tol: 1e-6,
            prox_max_iters: 500,
            prox_tol: 1e-8,
            method: Method::Cadmm,
            warm_start: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("eps_abs", self.eps_abs),
            ("eps_rel", self.eps_rel),
            ("cg_tol", self.cg_tol),
            ("prox_tol", self.prox_tol),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("max_outer_iters", self.max_outer_iters),
            ("cg_max_iters", self.cg_max_iters),
            ("prox_max_iters", self.prox_max_iters),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn cg_budget(&self) -> CgBudget {
        CgBudget {
            max_iters: self.cg_max_iters,
            tol: self.cg_tol,
        }
    }

    pub fn prox_budget(&self) -> ProxBudget {
        ProxBudget {
            max_iters: self.prox_max_iters,
            tol: self.prox_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive_values() {
        let bad = [
            SolverConfig {
                mu: 0.0,
                ..Default::default()
            },
            SolverConfig {
                beta: -1.0,
                ..Default::default()
            },
            SolverConfig {
                eps_rel: f64::NAN,
                ..Default::default()
            },
            SolverConfig {
                max_outer_iters: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn method_parses() {
        assert_eq!("CADMM".parse::<Method>().unwrap(), Method::Cadmm);
        assert_eq!("sadmm".parse::<Method>().unwrap(), Method::Sadmm);
        assert!("bp".parse::<Method>().is_err());
    }
}

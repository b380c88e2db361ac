//! Widely distributed radar imaging with constrained ADMM.
//!
//! Each sensor cluster `q` observes the scene through its own tomographic
//! operator `A_q`. A single global magnitude image `x_G` is reconstructed
//! jointly with per-cluster local images `x_q`, tied together either by
//! consensus (`x_q = x_G` for all `q`) or by sharing (`sum_q x_q = x_G`).
//!
//! - [`model`]: grid, cluster geometry, forward/adjoint operators,
//!   back-projection and phase estimation.
//! - [`simulate`]: seeded sparse scenes with aspect-dependent scattering and
//!   noisy phase histories.
//! - [`solvers`]: conjugate gradient, accelerated proximal gradient, the
//!   consensus and sharing engines and the composite baseline.
//! - [`orchestrate`]: central-node / cluster-node message schedule and a
//!   mailbox execution mode.
//! - [`metrics`]: sparsity, entropy, support F1 and image export.

pub mod error;
pub mod metrics;
pub mod model;
pub mod orchestrate;
pub mod simulate;
pub mod solvers;

pub use num_complex::Complex64;

pub use error::{Error, Result};

pub use metrics::{
    export_image, image_entropy, normalized_sparsity, read_image_csv, support_f1, EntropyConfig,
    ImageFormat, SupportScore,
};
pub use model::{backprojection_image, make_operator, ClusterGeometry, ForwardOperator, SceneGrid};
pub use orchestrate::{iteration_schedule, run_message_passing, MessageRecord};
pub use simulate::{make_uniform_clusters, PhaseHistory, RandomScene, Scatterer, SimScenario};
pub use solvers::{
    composite_baseline, run, Method, ReconstructionResult, SolverConfig, SolverState, Termination,
};

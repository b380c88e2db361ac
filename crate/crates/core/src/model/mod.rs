//! Scene geometry, the tomographic forward operator and its adjoint,
//! back-projection and phase-matrix estimation.

mod geometry;
mod grid;
mod operator;
mod toeplitz;

pub use geometry::{angle_difference, wrap_angle, ClusterGeometry};
pub use grid::SceneGrid;
pub use operator::{backprojection_image, make_operator, ForwardOperator, SPEED_OF_LIGHT};

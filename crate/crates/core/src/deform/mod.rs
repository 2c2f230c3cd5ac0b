//! Deformation backends: a surface spring-damper model with separate haptic
//! and visual geometry, and a sphere-node skeleton joined by damped springs.

mod skeleton;
mod surface;

pub use skeleton::{
    build_skeleton, spring_force, GelNode, GelSkeleton, SkeletonParams, Tether, SkinBinding, SpringForce,
    SpringLink, SKIN_EPSILON, SKIN_NEIGHBORS, SUBSTEPS,
};
pub use surface::{indent_surface, SurfaceModel, SurfaceParams};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("unstable stiffness: dt·sqrt(ks/m) = {ratio:.3} exceeds 1 (ks = {ks} N/m, m = {mass} kg)")]
    Stability { ratio: f64, ks: f64, mass: f64 },
    #[error("skeleton needs at least 4 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("non-finite force on node {0}")]
    NonFiniteForce(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

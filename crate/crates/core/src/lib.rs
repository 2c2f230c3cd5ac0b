//! Real-time visuo-haptic liver palpation simulator.
//!
//! A virtual probe indents a deformable liver whose contact forces are
//! computed at 1 kHz with a penalty spring-damper law. Two deformation
//! backends are available: a surface model with separate haptic and visual
//! geometry, and a sphere-node skeleton connected by damped springs.
//! Pathology presets change the felt stiffness, size and tenderness of the
//! organ; a reference classifier diagnoses them from palpation traces.

pub mod geometry;
pub mod collision;
pub mod deform;
pub mod engine;
pub mod haptics;
pub mod pathology;
pub mod persistence;
pub mod protocol;
pub mod scenegraph;

pub use geometry::{Aabb, TriMesh, Vec3};

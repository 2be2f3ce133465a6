//! Steerable multi-view, multi-cue dataset generation from triangle meshes.
//!
//! The crate is organized as the stages of the annotator:
//!
//! - [`mesh`]: OBJ/PLY parsing, validation, normals, curvature, occupancy.
//! - [`accel`]: BVH ray casting with a linear-scan reference.
//! - [`sampling`]: cameras, points-of-interest, covisibility, fixated poses
//!   and spline trajectories.
//! - [`render`]: G-buffer ray casting and the mid-level cue images derived
//!   from it, scheduled along the cue dependency graph.
//! - [`pipeline`]: configuration, the parallel resumable run, image encoding
//!   and the manifest.
//! - [`procedural`]: generated test scenes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod mesh;
pub mod pipeline;
pub mod procedural;
pub mod render;
pub mod sampling;

//! Geometry toolkit for single-view body scanning with normal-constrained
//! depth.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: pinhole camera, depth/normal grids and the differentiable
//!   depth-to-normals operator with its exact adjoint.
//! - [`losses`]: L1 depth/normal and mask cross-entropy losses with gradients.
//! - [`integrator`]: depth recovery from normals, by descent through the
//!   normals operator and by an orthographic Poisson solve.
//! - [`meshing`]: depth map triangulation and two-sided scan fusion.
//! - [`metrics`]: point-to-mesh distance, bidirectional mesh error and
//!   similarity alignment.
//! - [`synth`] and [`io`]: analytic ground truth and file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod integrator;
pub mod io;
pub mod losses;
pub mod meshing;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};

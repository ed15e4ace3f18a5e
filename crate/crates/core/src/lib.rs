//! Geometry and metrics for structured-polygon monocular 3D detection.
//!
//! A 3D box is represented by the eight vertices of its cuboid; their image
//! projections form a *structured polygon*. Given the polygon, the camera
//! intrinsics and an object height, the depth of every vertical edge follows
//! from `Z = f * H / h`, and the back-projected vertices average into a coarse
//! box. The crate also carries the bird's-eye-view plumbing used to refine
//! coarse boxes and the KITTI-style detection metrics used to score them.
//!
//! Everything here is pure computation over in-memory values. The crate is
//! `no_std` and only needs `alloc`; file formats and the command-line driver
//! live in the `polydepth` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bev;
pub mod depth;
mod error;
pub mod eval;
pub mod geometry;
pub mod heatmap;
pub mod math;

pub use error::{Error, Result};
pub use geometry::{Box3D, CameraIntrinsics, Cuboid, Pixel, Point3, StructuredPolygon};

//! Plane detection for simulated 3D laser scans.
//!
//! The crate covers the full pipeline:
//!
//! - [`scan`] / [`scenes`]: a 2-DOF rotating-stage range-scanner simulator
//!   and a set of built-in polygonal environments with known ground truth.
//! - [`detect`]: sequential multi-plane RANSAC with normal-vector gating and
//!   total-least-squares refinement.
//! - [`hull`]: merging of coplanar detections and convex-hull outlines of
//!   each planar region.
//! - [`experiment`]: a threshold-sweep harness that reruns detection across
//!   point densities and scores false detections against the ground truth.
//! - [`geom`], [`knn`], [`io`], [`config`]: supporting geometry, exact
//!   k-nearest-neighbor search, file codecs, and CLI configuration.
//!
//! All randomized stages take explicit seeds and are bit-reproducible.

pub mod config;
pub mod detect;
pub mod experiment;
pub mod geom;
pub mod hull;
pub mod io;
pub mod knn;
pub mod scan;
pub mod scenes;

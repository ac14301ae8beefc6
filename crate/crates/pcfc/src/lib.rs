//! Point-cloud failure criterion pipeline for two-phase composites.
//!
//! The crate covers the full virtual-testing loop for a unidirectional
//! fiber/matrix composite cross-section:
//!
//! 1. [`microgen`] — periodic microstructures of non-overlapping circular
//!    inclusions at a target volume fraction.
//! 2. [`mesh`] — structured quadrilateral meshes with per-element phase tags.
//! 3. [`fea`] — linear-elastic plane-strain solves, stress recovery and
//!    volume-averaged (homogenized) stresses.
//! 4. [`surface`] — a grid of surface-traction load cases, each scaled to the
//!    first constituent failure, yielding a failure-surface point cloud.
//! 5. [`classifier`] — a kd-tree index over the cloud answering
//!    inside/outside-the-envelope queries via k-nearest-neighbor norms.
//! 6. [`harness`] — experiment drivers: convergence study, train/test
//!    validation sweeps, perturbation tests, and the end-to-end pipeline.

pub mod classifier;
pub mod fea;
pub mod harness;
pub mod mesh;
pub mod microgen;
pub mod rng;
pub mod surface;

pub use fea::{Material, MaterialSet, StressTensor4};
pub use microgen::{Microstructure, MicrostructureSpec, Phase};

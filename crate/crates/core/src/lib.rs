//! Heat conduction with fading memory in the bulk and on the boundary,
//! coupled through a Wentzell boundary law in which the trace evolves by its
//! own equation.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds P1 meshes (unit interval, disk) and their bulk and
//!   boundary mass/stiffness matrices.
//! * [`wentzell`] assembles the Wentzell Laplacian, computes its eigenbasis
//!   and solves the static bulk-surface elliptic problem.
//! * [`memory`] holds the fading-memory kernels and the past-history state,
//!   advanced by exact transport along characteristics.
//! * [`nonlinear`] holds the bulk and boundary reactions with their sign,
//!   growth and balance validators.
//! * [`galerkin`] couples everything into the modal time stepper.
//! * [`analysis`] computes energies and runs the inequality monitors and
//!   convergence studies.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
mod error;
pub mod galerkin;
pub mod geometry;
mod linalg;
pub mod memory;
pub mod nonlinear;
pub mod sparse;
pub mod wentzell;

pub use error::{Error, Result};
pub use geometry::{Backend, Geometry};
pub use wentzell::{BulkBoundaryField, EigenBasis, SpaceTag, WentzellOperator};

pub use nalgebra::{DMatrix, DVector};

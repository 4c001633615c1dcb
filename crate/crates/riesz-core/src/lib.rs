//! Numerical toolkit for Riesz potential theory.
//!
//! The crate computes potentials, energies, capacities, equilibrium measures,
//! balayage (sweeping, realized as projection onto the cone of nonnegative
//! measures), Kelvin transforms, and Wiener-type thinness diagnostics for the
//! kernel `|x - y|^(alpha - n)` with `0 < alpha <= 2`, `alpha < n`.
//!
//! Everything operates on finitely supported, mollified discrete measures:
//! a compact set is carried by a [`geometry::PointCloud`], a measure by a
//! [`measure::DiscreteMeasure`], and the quadratic energy form by a
//! [`kernel::GramMatrix`]. A single nonnegativity-constrained QP solver
//! ([`nnqp`]) backs both equilibrium measures (linear term = all-ones) and
//! balayage (linear term = source potentials).
//!
//! Modules:
//! - [`geometry`]: region descriptors, membership, sphere inversion, samplers
//! - [`measure`]: weighted point-cloud measures and the Kelvin transform
//! - [`kernel`]: kernel evaluation, Gram matrices, potentials, energies
//! - [`nnqp`]: projected-gradient / active-set nonnegative QP solver
//! - [`balayage`]: sweeping onto compact targets and exhaustion traces
//! - [`equilibrium`]: capacities, equilibrium measures, Wiener-type series
//! - [`principles`]: positivity-of-mass verifiers and named experiments

pub mod balayage;
pub mod equilibrium;
mod error;
pub mod geometry;
pub mod kernel;
pub mod measure;
pub mod nnqp;
pub mod principles;
mod rng;

pub use error::{Error, Result};
pub use geometry::{Inversion, Point, PointCloud, Region, SampleMode};
pub use kernel::{GramMatrix, PotentialField, RieszParams};
pub use measure::{DiscreteMeasure, SignedDecomposition};
pub use nnqp::{Nnqp, NnqpSolution};

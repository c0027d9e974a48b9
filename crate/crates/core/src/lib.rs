//! Constructive discrepancy minimization.
//!
//! * [`set_system`]: set systems, colorings, discrepancy, instance generators.
//! * [`subspace`]: orthonormal complements of linear constraints and Gaussian
//!   sampling inside them.
//! * [`partial_coloring`]: the constrained Gaussian random walk that colors at
//!   least half of the points while keeping every set's drift bounded.
//! * [`full_coloring`]: iterated partial coloring plus randomized rounding.
//! * [`beck_fiala`]: deterministic null-space elimination with
//!   `disc <= 2t - 1` for systems of maximum degree `t`.
//! * [`oracle`]: exhaustive minimum discrepancy and independent checkers.
//! * [`experiments`]: seeded Monte-Carlo suites shared by the CLI and tests.

pub mod beck_fiala;
pub mod error;
pub mod experiments;
pub mod full_coloring;
pub mod oracle;
pub mod partial_coloring;
pub mod rng;
pub mod set_system;
pub mod subspace;

pub use error::{Error, Result};
pub use set_system::{Coloring, FractionalPoint, SetSystem};

//! Simulation of partial Dirichlet-to-Neumann measurements for semilinear
//! elliptic equations `-Δu + V(x, u) = 0` on the unit square, and recovery of
//! the Taylor coefficients `V_m(x)` from measurements on a boundary arc.
//!
//! Module map:
//!
//! * [`geometry`]: grid, boundary walk, accessible arc, quadrature
//! * [`sparse`]: CSR storage and Jacobi-preconditioned CG
//! * [`potential`], [`expr`]: the truncated nonlinearity and its closed-form inputs
//! * [`forward`]: linear and Newton solvers
//! * [`dtn`]: normal derivatives and the partial DtN map
//! * [`linearization`]: set partitions, the derivative cascade, mixed divided differences
//! * [`harmonic`]: arc-supported harmonic test functions
//! * [`reconstruction`]: moment systems and the inductive inversion
//! * [`config`], [`scenarios`]: experiment runner behind the `pdtn` binary

pub mod config;
pub mod dtn;
pub mod error;
pub mod expr;
pub mod forward;
pub mod geometry;
pub mod harmonic;
pub mod linearization;
pub mod noise;
pub mod potential;
pub mod reconstruction;
pub mod scenarios;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{BoundaryTrace, GammaMask, Grid2D, ScalarField};
pub use potential::PotentialSeries;

//! Generalized principal eigenvalues of superquadratic viscous
//! Hamilton-Jacobi ergodic problems and of their gradient-constrained limit.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the shared types ([`Exponent`], [`Potential`],
//!   [`ProblemSpec`], [`GridFunction`], [`EigenEstimate`]).
//! * [`analytic`] provides closed-form subsolutions, thresholds and bounds
//!   used as oracles.
//! * [`discretize`] builds monotone upwind operators on truncated line and
//!   radial meshes; [`solver`] runs damped semismooth Newton on them.
//! * [`eigen`] turns solves into eigenvalue estimates and [`sweeps`] runs
//!   the parameter studies in `m` and `beta`.
//!
//! Data-parallel loops go through [`exec`]; disabling the default
//! `parallel` feature makes every loop sequential.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod discretize;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod sweeps;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{
    japanese, validate_potential, BetaThresholds, Diagnostics, EigenEstimate, Exponent,
    ExponentKind, Geometry, GridFunction, Method, Potential, PotentialReport, PotentialViolation,
    ProblemSpec, Profile, SignProfile,
};

/// Crate version, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Generalized anisotropic, non-stationary collision operator for the
//! spatially homogeneous kinetic equation.
//!
//! The crate provides
//! - a cubic velocity grid with dual central-difference operators ([`grid`]),
//! - the kernel algebra and spectrally separated kernels ([`kernels`]),
//! - an O(N²) reference evaluator of the collision flux ([`direct`]),
//! - an O(N log N) evaluator built on zero-padded FFT convolutions ([`fast`]),
//! - forward-Euler time integration with conservation diagnostics ([`solver`]),
//! - initial conditions, diagnostics, and weak-form kernel fitting
//!   ([`initcond`], [`analysis`], [`learning`]).

pub mod analysis;
pub mod direct;
pub mod error;
pub mod fast;
pub mod grid;
pub mod initcond;
pub mod kernels;
pub mod learning;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{GhostPolicy, ScalarField, VectorField, VelocityGrid};
pub use kernels::{CollisionKernel, KernelMatrix, SsKernel, UnivariateBasis};

pub use nalgebra::{Matrix3, Vector3};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

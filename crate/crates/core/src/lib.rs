//! Spectrum-preserving optimization on the isospectral manifold.
//!
//! Weights move only by orthogonal equivalence, `W ← R·W·P` with `R`, `P`
//! built from skew-symmetric generators, so their singular values stay
//! where initialization put them. The crate provides the dense kernels,
//! the manifold geometry, the optimizer family with its baselines, small
//! test problems and an experiment harness.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod optim;
pub mod problems;
pub mod random;
pub mod selftest;

pub use error::{Error, Result};
pub use linalg::Matrix;

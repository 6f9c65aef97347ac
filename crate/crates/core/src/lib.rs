//! Exact and sampled Haar-measure statistics for quantum-circuit cost
//! functions in the Riemannian (parametrization-free) formulation.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches
//! files, threads or the command line lives in the `qvar` companion crate.
//!
//! Module map:
//!
//! - [`linalg`]: dense complex matrices, tensor-factor bookkeeping, QR and
//!   Hermitian eigendecomposition.
//! - [`haar`]: seeded, counter-split random streams and Haar sampling on U(N).
//! - [`circuit`]: circuit model, cost evaluation and single-gate environments.
//! - [`riemannian`]: tangent-space geometry of U(N) and gradient descent.
//! - [`weingarten`]: closed-form single-gate Haar moments.
//! - [`variance_lab`]: multi-gate variance estimators and bound checks.
//! - [`stats`]: means, variances and jackknife standard errors.
//! - [`sampling`]: scheduling of independent Monte-Carlo work items.
#![no_std]

extern crate alloc;

pub mod circuit;
pub mod error;
pub mod haar;
pub mod linalg;
pub mod riemannian;
pub mod sampling;
pub mod stats;
pub mod variance_lab;
pub mod weingarten;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, FactorShape, C64};

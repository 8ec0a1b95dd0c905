//! Stable-like random walks on finitely generated groups of polynomial
//! growth: probability measures with heavy tails, exact sparse convolution
//! powers with certified truncation error, Dirichlet forms and
//! pseudo-Poincare probes, and weighted-geometry volume exponents.

pub mod config;
pub mod convolution;
pub mod dirichlet;
pub mod error;
pub mod fit;
pub mod group;
pub mod measures;
pub mod polycyclic;
pub mod runner;
pub mod scalar;
pub mod weights;

pub use error::{Error, Result};
pub use group::{Elem, GroupDescriptor, GroupKind, LengthStatus, WordMetric};
pub use scalar::Scalar;

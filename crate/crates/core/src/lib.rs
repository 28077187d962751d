//! Multiscale finite elements with optimal local bases for
//! `-div(a grad u) = f` on the unit square with rough coefficients.
//!
//! The offline stage builds, for every interior coarse edge, an oversampling
//! problem on the surrounding patch, takes a weighted SVD of the map from local
//! solutions to their interpolation residual on the edge, and keeps the left
//! singular vectors above a threshold. Together with nodal interpolation
//! functions these form a small trial space; the online stage is one coarse
//! Galerkin solve per forcing, optionally followed by per-cell bubble solves.

pub mod artifact;
pub mod basis;
pub mod coefficient;
pub mod config;
pub mod error;
pub mod expr;
pub mod fem;
pub mod local;
pub mod mesh;
pub mod oversampling;
pub mod solve;
pub mod sparse;
pub mod studies;

pub use coefficient::{CoefficientField, CoefficientSpec, Inclusion};
pub use error::{Error, ErrorClass, Result, Site};
pub use fem::{FineField, Forcing};
pub use mesh::{Region, TwoLevelMesh};

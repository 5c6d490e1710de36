//! Galerkin boundary-integral solver for the polarisation of N dielectric
//! spheres in a homogeneous background.
//!
//! Unknowns are expanded in real spherical harmonics on every sphere. The
//! reduced second-kind system is solved with GMRES or, after symmetrisation,
//! with CG; the single-layer operator is applied either pair by pair or
//! through an octree of multipole expansions.

pub mod dense;
pub mod error;
pub mod geometry;
pub mod harmonics;
pub mod hierarchical;
pub mod krylov;
pub mod operators;
pub mod strategies;

pub use error::{Error, Result};
pub use geometry::{build_lattice, validate, Configuration, Pattern, SignClass, Species, Sphere};

//! Positivity-preserving, entropy-stable discontinuous Galerkin spectral
//! element solver for the 2D compressible Euler equations on curvilinear
//! quadrilateral meshes with 2:1 adaptive refinement.

pub mod error;
pub mod mesh;
pub mod euler;
pub mod reference_ops;
pub mod dgsem;
pub mod limiters;
pub mod amr;
pub mod timestepping;
pub mod driver;

pub use error::{Error, Result};

//! Spectral resolvent solvers and numerical estimate checks for the linearized
//! compressible Stokes (Lame) system with free boundary conditions in the
//! whole space and the half-space.

pub mod error;
pub mod grid;
pub mod besov;
pub mod halfspace;
pub mod laplace;
pub mod quad;
pub mod stokes;
pub mod symbols;
pub mod wholespace;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

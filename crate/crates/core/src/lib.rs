//! Numerical solvers for the effective Ginzburg-Landau problems of surface
//! superconductivity near boundaries with corners: 1D boundary profiles,
//! finite strips, wedge (corner) domains and the assembly of the energy
//! expansion for piecewise-smooth domains.

pub mod assembler;
pub mod corner;
pub mod error;
pub mod fieldmin;
pub mod profile1d;
pub mod strip;

pub use error::{Error, Result};

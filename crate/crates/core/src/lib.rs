//! Single lossy cavity mode coupled to a comb of inhomogeneously broadened
//! spin ensembles.
//!
//! The crate computes the rotating-frame cavity amplitude `A(t)` by three
//! independent routes (a discretized linear ODE system, a Volterra integral
//! equation with a memory kernel, and a branch-cut spectral integral), solves
//! the non-Hermitian eigenproblem of the discretized system, and models
//! spectral hole burning as a multiplicative modification of the spin density.
//!
//! Units: angular frequencies are rad/μs and times are μs throughout the
//! library. [`units`] converts from the MHz / GHz / ns values used in
//! configuration files.

pub mod dynamics;
pub mod error;
pub mod laplace;
pub mod modes;
pub mod params;
pub mod quadrature;
pub mod scenario;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};

pub use num_complex::Complex64;

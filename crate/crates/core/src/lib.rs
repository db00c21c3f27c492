//! Steady solutions of the 2D incompressible Navier-Stokes equations outside
//! the unit disk, built as perturbations of the rotating flow `mu e_theta / r`.
//!
//! The stream-function/vorticity pair is expanded in angular Fourier modes;
//! each mode solves a pair of radial ODEs whose Green's functions are powers
//! of `r`. A fixed-point iteration couples the modes through the convective
//! term and enforces the boundary trace on `r = 1`; a secant search over `mu`
//! then prescribes the mean tangential boundary velocity.

pub mod error;
pub mod field_eval;
pub mod grid_quadrature;
pub mod linear_solver;
pub mod mode_algebra;
pub mod nonlinearity;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

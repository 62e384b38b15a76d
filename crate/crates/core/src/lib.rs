//! Numerical laboratory for the regional fractional Laplacian with critical
//! growth: discrete bilinear forms, energy functionals, Nehari ground states
//! and the semi-classical concentration function.

pub mod cli;
pub mod concentration;
pub mod error;
pub mod forms;
pub mod functionals;
pub mod model;
pub mod solver;

pub use error::{Error, Result};

//! Numerical laboratory for boundary regularity of the nonlocal fractional
//! (s,p)-Laplacian: variational Dirichlet solver, fractional capacities, a dyadic
//! Wiener profile and a regular / semiregular / strongly irregular classifier.

pub mod capacity;
pub mod classify;
pub mod config;
mod conv;
pub mod domain;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod field;
pub mod kernel;
mod power;
pub mod report;
pub mod solve;

pub use error::{Error, Result};
pub use field::Field;

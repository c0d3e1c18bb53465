//! Ensemble finite element solver for Boussinesq natural convection.

pub mod error;
pub mod fem;
pub mod mesh;
pub mod observables;
pub mod perturbation;
pub mod scenarios;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};

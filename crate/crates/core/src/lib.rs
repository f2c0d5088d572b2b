//! Bayesian variable selection for multivariate linear regression with
//! correlated errors.
//!
//! Four Gibbs-based estimators share one data model `Y = X B + E` with
//! `E` rows drawn from `N(0, Sigma)`; see [`samplers::Method`].

pub mod chain;
pub mod cli;
pub mod dist;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod samplers;
pub mod simgen;

pub use error::{Error, Result};

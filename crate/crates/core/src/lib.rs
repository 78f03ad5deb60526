//! Simulator and validation harness for N Brownian particles reflected above
//! a massive inert particle whose velocity gains from gravity and loses to
//! collision local time.
//!
//! The crate builds the model matrices, solves the discrete Skorokhod
//! problem on the orthant, simulates the coupled velocity/gap/local-time
//! process (and the unranked particle system it comes from), evaluates the
//! closed-form product stationary law, and turns replica ensembles into
//! the checks the theory predicts: stationary marginals, law-of-large-numbers
//! rates, collision-intensity ordering, hitting-time tails and a marginal
//! convergence proxy.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod runner;
pub mod skorokhod;
pub mod stationary;

pub use error::{Error, Result};

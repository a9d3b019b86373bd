//! Flexible stochastic conditional duration model: simulation, Bayesian
//! estimation by Gibbs-within-Metropolis sampling, correctness testing and
//! diagnostics.

pub mod data;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod gir;
pub mod jet;
pub mod mcmc;
pub mod model;
pub mod priors;
pub mod special;
pub mod splines;
pub mod state_sampler;
pub mod synthetic;

pub use error::{Error, Result};

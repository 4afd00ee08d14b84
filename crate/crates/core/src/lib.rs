//! Bayesian recovery of the initial condition of the heat equation from
//! noisy sine coefficients.
//!
//! The model is the white-noise sequence model `Y_i = κ_i μ_i + n^{-1/2} Z_i`
//! with `κ_i = exp(-i²π²T)` and a Gaussian product prior `μ_i ~ N(0, λ_i)`.
//! The crate provides the exact conjugate posterior, credible balls and
//! intervals, Monte Carlo coverage experiments, numerical checks of the series
//! asymptotics behind the contraction rates, and the `heatbayes` CLI.

pub mod asymptotics;
pub mod cli;
pub mod coverage;
pub mod credible;
pub mod error;
pub mod functional;
pub mod posterior;
pub mod prior;
pub mod rng;
pub mod sequence;
pub mod summation;

pub use error::{Error, Result};

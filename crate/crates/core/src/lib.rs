//! Discrete delta hedging under stochastic volatility.
//!
//! The crate covers the whole chain: Heston path simulation, Fourier pricing of
//! the hedged call, fixed-frequency hedge evaluation with proportional costs,
//! supervised datasets built from partial price histories, small from-scratch
//! classifiers, and the probability-weighted multi-scale hedging backtest.

pub mod classifiers;
mod csvio;
pub mod dataset;
pub mod error;
pub mod hedge_engine;
pub mod heston_sim;
pub mod multiscale;
pub mod pricer;
pub mod rng;

pub use error::{Error, Result};

//! Stochastic wave systems driven by Riesz-correlated Gaussian noise:
//! kernel identities, noise sampling, path simulation, capacities and
//! hitting probabilities.

pub mod cells;
pub mod error;
pub mod fft;
pub mod hit_analysis;
pub mod noise_field;
pub mod potential_theory;
pub mod quadrature;
pub mod rng;
pub mod spde_sim;
pub mod stats;
pub mod wave_kernel;

pub use error::{Error, Result};

//! Quantum Brownian motion as an ensemble of classical trajectories.
//!
//! A particle coupled to an ohmic oscillator bath is propagated with a
//! generalized Langevin equation whose colored noise carries the quantum
//! fluctuation–dissipation spectrum. State preparations act on trajectories
//! through their Wigner-representation kernels, and quantum expectation
//! values are weighted averages of Weyl symbols over the ensemble.

pub mod app;
pub mod bath;
pub mod config;
pub mod dump;
pub mod dynamics;
pub mod error;
pub mod noise;
pub mod observables;
pub mod preparation;
pub mod quad;
pub mod reference;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

//! Discretized infinite-factor bond market laboratory.
//!
//! Simulates forward-rate surfaces driven by countably many Wiener factors,
//! assembles the bond-price diffusion operator in a Sobolev curve space, and
//! probes both sides of the replication question: spectral constructions of
//! bounded claims that no admissible portfolio attains, generalized hedges
//! recovering claims when the operator is injective, and a stopped local
//! martingale showing that dual optimality alone does not price claims.

pub mod completeness;
pub mod config;
pub mod counterexample;
pub mod error;
pub mod grid;
pub mod gspace;
pub mod incompleteness;
pub mod market;
pub mod operator;
pub mod rng;
pub mod runner;
pub mod volatility;

pub use error::{LabError, Result};
pub use grid::TimeGrid;
pub use rng::CounterRng;

//! Tipping analysis for a two-variable tropical cyclone intensity model.
//!
//! The crate covers the deterministic model and its equilibria, invariant manifolds and
//! basins, parameter ramps with critical-rate search, reflected stochastic simulation,
//! and the Freidlin-Wentzell action machinery used for most probable transition paths.

pub mod action;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifolds;
pub mod model;
pub mod ode;
pub mod output;
pub mod rate;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{ModelParams, State};

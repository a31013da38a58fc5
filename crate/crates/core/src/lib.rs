//! Heralded single-photon source model, Monte Carlo simulator and HBT estimator.

pub mod analytic;
pub mod config;
pub mod domain;
pub mod estimator;
pub mod error;
pub mod record;
pub mod report;
pub mod rng;
pub mod simulator;
mod stats;
pub mod sweep;

pub use analytic::FiguresOfMerit;
pub use domain::{Flag, Scenario, SourceParams};
pub use error::{Error, Result};

//! Probabilistic available delivery capability (ADC) of unbalanced
//! three-phase distribution feeders.

pub mod assessment;
pub mod chaos;
pub mod continuation;
pub mod data;
pub mod error;
pub mod feeder;
pub mod powerflow;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};

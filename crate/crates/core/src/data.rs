//! Bundled 13-node test feeder and its 12-input stochastic scenario.
//!
//! The feeder is a best-effort reconstruction: spot loads halved, delta loads
//! placed on single phases, the distributed load lumped at bus 671, and a
//! source impedance tuned so the loadability limits land near published
//! figures for the modified system.

use crate::error::Result;
use crate::feeder::{load_feeder, FeederModel};
use crate::stochastic::Scenario;

pub const IEEE13_FEEDER_JSON: &str = include_str!("../data/ieee13_feeder.json");
pub const IEEE13_SCENARIO_JSON: &str = include_str!("../data/ieee13_scenario.json");

pub fn ieee13_feeder() -> Result<FeederModel> {
    load_feeder(IEEE13_FEEDER_JSON)
}

pub fn ieee13_scenario() -> Result<Scenario> {
    Scenario::from_json(IEEE13_SCENARIO_JSON)
}

//! Store-and-forward networking over a low-rate, pass-windowed satellite
//! uplink for autonomous vehicles.
//!
//! The crate is organised bottom-up:
//!
//! - [`orbit`]: periodic visibility from a reduced ephemeris
//!   (last passage, period, window).
//! - [`linkmodel`]: radio profiles and link arithmetic (airtime, capacity,
//!   goodput, delivery probability, energy).
//! - [`fragproto`]: the 32-byte frame codec, fragmentation and reassembly
//!   with duplicate suppression.
//! - [`dtn`]: node state machines, static routing, the SatComms transmit
//!   scheduler and multi-vehicle uplink slot schedulers.
//! - [`sim`]: the deterministic discrete-event engine, scenario config,
//!   event log and metrics.
//! - [`scenarios`]: canned, assertion-bearing scenarios.
//! - [`report`]: reports derived from an event log.

pub mod dtn;
pub mod fragproto;
pub mod linkmodel;
pub mod orbit;
pub mod report;
pub mod scenarios;
pub mod sim;

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Simulation time in integer milliseconds since the scenario epoch.
///
/// Signed so that visibility can be evaluated before the configured last
/// passage.
pub type Millis = i64;

/// Node identifier. One byte because it travels in every frame header.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(transparent)]
pub struct NodeId(pub u8);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl From<u8> for NodeId {
    fn from(v: u8) -> Self {
        NodeId(v)
    }
}

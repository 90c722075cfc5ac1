//! Discrete-event simulation of the whole relay chain.

pub mod config;
mod engine;
pub mod event;
mod ledger;
pub mod log;
pub mod metrics;
pub mod rng;
pub mod script;
pub mod vehicle;

pub use config::{ConfigError, ScenarioConfig};
pub use engine::{run, run_with_sink, RunOutput, SimError, DEFAULT_BATTERY_J};
pub use log::{parse_jsonl, to_jsonl, LogDetail, LogRecord, LOG_SCHEMA_VERSION};
pub use metrics::{Metrics, NodeMetrics, PassMetrics};
pub use script::{Action, Expect, Outcome, ScriptStep};

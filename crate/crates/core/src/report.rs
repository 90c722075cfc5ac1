//! Reports derived from an event log, plus the profile comparison and pass
//! plan tables printed by the CLI.
//!
//! A report only ever reads log records, so one rebuilt from a saved log is
//! identical to the one produced at the end of a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::linkmodel::{builtin_profiles, energy_of, LinkError, RadioProfile, HUMSAT};
use crate::orbit::{OrbitEphemeris, OrbitError};
use crate::sim::log::{LogDetail, LogRecord, ScriptOutcome};
use crate::sim::metrics::{DatumTotals, Metrics, NodeMetrics};
use crate::{Millis, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: NodeId,
    pub name: String,
    #[serde(flatten)]
    pub metrics: NodeMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassRow {
    pub satellite: NodeId,
    pub window_start: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<Millis>,
    pub bytes_raw: u64,
    pub bytes_goodput: u64,
    pub frames: u64,
    pub duplicates: u64,
    pub energy_j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub nodes: Vec<NodeReport>,
    pub passes: Vec<PassRow>,
    pub datums: DatumTotals,
    pub dropped_by_reason: BTreeMap<String, u64>,
    pub endurance_violations: u64,
    pub assertions: Vec<ScriptOutcome>,
    pub passed: bool,
}

impl Report {
    pub fn from_records(records: &[LogRecord]) -> Self {
        let metrics = Metrics::from_records(records);
        let names: BTreeMap<NodeId, String> = records
            .iter()
            .find_map(|r| match &r.detail {
                LogDetail::RunStart(h) => Some(h.nodes.iter().map(|n| (n.id, n.name.clone())).collect()),
                _ => None,
            })
            .unwrap_or_default();
        Self::from_metrics(&metrics, &names)
    }

    pub fn from_metrics(m: &Metrics, names: &BTreeMap<NodeId, String>) -> Self {
        Report {
            scenario: m.scenario.clone(),
            seed: m.seed,
            nodes: m
                .nodes
                .iter()
                .map(|(id, nm)| NodeReport {
                    id: *id,
                    name: names.get(id).cloned().unwrap_or_else(|| id.to_string()),
                    metrics: nm.clone(),
                })
                .collect(),
            passes: m
                .passes
                .iter()
                .filter(|p| p.frames > 0 || p.bytes_goodput > 0)
                .map(|p| PassRow {
                    satellite: p.satellite,
                    window_start: p.window_start,
                    window_end: p.window_end,
                    bytes_raw: p.bytes_raw,
                    bytes_goodput: p.bytes_goodput,
                    frames: p.frames,
                    duplicates: p.duplicates,
                    energy_j: p.energy_j,
                })
                .collect(),
            datums: m.datums,
            dropped_by_reason: m
                .dropped_by_reason
                .iter()
                .map(|(r, n)| (format!("{r:?}"), *n))
                .collect(),
            endurance_violations: m.endurance_violations,
            assertions: m.assertions.clone(),
            passed: m.all_assertions_passed(),
        }
    }

    /// Canonical serialization: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}  seed {}", self.scenario, self.seed);
        let d = &self.datums;
        let _ = writeln!(
            out,
            "datums: enqueued {}  delivered {}  dropped {}  stored {}",
            d.enqueued,
            d.delivered,
            d.dropped,
            d.stored.map_or("-".into(), |s| s.to_string())
        );
        if !self.dropped_by_reason.is_empty() {
            let reasons: Vec<String> = self.dropped_by_reason.iter().map(|(r, n)| format!("{r} {n}")).collect();
            let _ = writeln!(out, "dropped by reason: {}", reasons.join(", "));
        }
        if self.endurance_violations > 0 {
            let _ = writeln!(out, "endurance violations: {}", self.endurance_violations);
        }

        let _ = writeln!(out, "\n{:<22} {:>7} {:>7} {:>8} {:>7} {:>6} {:>8} {:>9}", "node", "frames", "copies", "received", "dups", "deliv", "goodput", "energy_j");
        for n in &self.nodes {
            let m = &n.metrics;
            let _ = writeln!(
                out,
                "{:<22} {:>7} {:>7} {:>8} {:>7} {:>6} {:>8} {:>9.1}",
                format!("{} ({})", n.name, n.id.0),
                m.frames_sent,
                m.copies_sent,
                m.frames_received,
                m.duplicates,
                m.datums_received,
                m.bytes_goodput,
                m.energy.joules
            );
        }

        if !self.passes.is_empty() {
            let _ = writeln!(out, "\n{:<4} {:>19} {:>9} {:>9} {:>7} {:>5} {:>9}", "sat", "window", "raw", "goodput", "frames", "dups", "energy_j");
            for p in &self.passes {
                let window = format!(
                    "{}-{}",
                    secs(p.window_start),
                    p.window_end.map_or("?".into(), secs)
                );
                let _ = writeln!(
                    out,
                    "{:<4} {:>19} {:>9} {:>9} {:>7} {:>5} {:>9.1}",
                    p.satellite.0, window, p.bytes_raw, p.bytes_goodput, p.frames, p.duplicates, p.energy_j
                );
            }
        }

        if !self.assertions.is_empty() {
            let _ = writeln!(out);
            for a in &self.assertions {
                let tag = if a.passed { "PASS" } else { "FAIL" };
                let mut note = String::new();
                if a.expected != crate::sim::Outcome::Pass {
                    note.push_str(" (expected to fail)");
                }
                if a.attempts > 1 {
                    let _ = write!(note, " (attempt {})", a.attempts);
                }
                if a.extension {
                    note.push_str(" [extension]");
                }
                let row = if a.row.is_empty() { String::new() } else { format!("[{}] ", a.row) };
                let _ = writeln!(out, "{tag} {row}{}{note}", a.name);
            }
            let passed = self.assertions.iter().filter(|a| a.passed).count();
            let _ = writeln!(out, "{passed}/{} assertions passed", self.assertions.len());
        }
        out
    }
}

fn secs(ms: Millis) -> String {
    if ms % 1000 == 0 {
        format!("{}s", ms / 1000)
    } else {
        format!("{:.3}s", ms as f64 / 1000.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("window must be positive, got {0} ms")]
    NonPositiveWindow(Millis),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub name: String,
    pub frame_bytes: u32,
    pub air_rate_bps: u32,
    pub redundancy: u32,
    pub airtime_per_frame_ms: Millis,
    /// Raw bytes the air rate carries over the window.
    pub pass_capacity_bytes: u64,
    /// Payload bytes in whole fragments, all copies sent.
    pub pass_goodput_bytes: u64,
    /// Transmitting for the whole window.
    pub pass_energy_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_pass_bytes: Option<u64>,
}

pub fn profile_row(p: &RadioProfile, window: Millis) -> Result<ProfileRow, TableError> {
    if window <= 0 {
        return Err(TableError::NonPositiveWindow(window));
    }
    Ok(ProfileRow {
        name: p.name.clone(),
        frame_bytes: p.frame_bytes,
        air_rate_bps: p.air_rate_bps,
        redundancy: p.redundancy,
        airtime_per_frame_ms: p.frame_airtime(),
        pass_capacity_bytes: p.pass_capacity(window),
        pass_goodput_bytes: p.pass_goodput(window, p.payload_capacity())?,
        pass_energy_j: energy_of(p, window, 0),
        reference_pass_bytes: p.reference_pass_bytes,
    })
}

/// One row per builtin profile, HUMSAT first.
pub fn compare_profiles(window: Millis) -> Result<Vec<ProfileRow>, TableError> {
    let mut profiles: Vec<RadioProfile> = builtin_profiles().into_values().collect();
    profiles.sort_by_key(|p| (p.name != HUMSAT, p.name.clone()));
    profiles.iter().map(|p| profile_row(p, window)).collect()
}

pub fn render_profiles(rows: &[ProfileRow]) -> String {
    let mut out = format!(
        "{:<13} {:>6} {:>8} {:>4} {:>11} {:>12} {:>12} {:>10}\n",
        "profile", "frame", "rate", "copy", "airtime_ms", "capacity_B", "goodput_B", "energy_J"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<13} {:>6} {:>8} {:>4} {:>11} {:>12} {:>12} {:>10.1}",
            r.name,
            r.frame_bytes,
            r.air_rate_bps,
            r.redundancy,
            r.airtime_per_frame_ms,
            r.pass_capacity_bytes,
            r.pass_goodput_bytes,
            r.pass_energy_j
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassPlanRow {
    pub satellite: NodeId,
    pub start_ms: Millis,
    pub end_ms: Millis,
    /// HUMSAT raw capacity of the full window.
    pub capacity_bytes: u64,
}

pub fn plan_passes(eph: &OrbitEphemeris, from: Millis, to: Millis) -> Result<Vec<PassPlanRow>, TableError> {
    let humsat = &builtin_profiles()[HUMSAT];
    Ok(eph
        .windows_between(from, to)?
        .into_iter()
        .map(|w| PassPlanRow {
            satellite: w.satellite_id,
            start_ms: w.start,
            end_ms: w.end,
            capacity_bytes: humsat.pass_capacity(w.duration()),
        })
        .collect())
}

pub fn render_pass_plan(rows: &[PassPlanRow]) -> String {
    let mut out = format!("{:<4} {:>14} {:>14} {:>12}\n", "sat", "start_s", "end_s", "capacity_B");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<4} {:>14.3} {:>14.3} {:>12}",
            r.satellite.0,
            r.start_ms as f64 / 1000.0,
            r.end_ms as f64 / 1000.0,
            r.capacity_bytes
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn humsat_pass_row() {
        let rows = compare_profiles(300_000).unwrap();
        assert_eq!(rows[0].name, HUMSAT);
        assert_eq!(rows[0].pass_capacity_bytes, 45_000);
        assert!((rows[0].pass_energy_j - 960.0).abs() < 1e-9);
        assert_eq!(rows.len(), builtin_profiles().len());
    }

    #[test]
    fn zero_window_rejected() {
        assert!(matches!(compare_profiles(0), Err(TableError::NonPositiveWindow(0))));
    }

    #[test]
    fn plan_inside_window_is_one_row() {
        let eph = OrbitEphemeris::new(NodeId(2), 0, 5_802_000, 300_000).unwrap();
        let rows = plan_passes(&eph, 100_000, 100_000).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].capacity_bytes, 45_000);
    }
}

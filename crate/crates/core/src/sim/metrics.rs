//! Counters folded from log records.
//!
//! The engine feeds every record it emits through [`Metrics::apply`]; a saved
//! log replayed through the same fold yields identical metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::log::{ArrivalOutcome, LogDetail, LogRecord, ScriptOutcome, SlotRecord};
use crate::dtn::{DropReason, PassTag};
use crate::linkmodel::EnergyLedger;
use crate::{Millis, NodeId};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    /// Distinct fragments put on the air.
    pub frames_sent: u64,
    pub copies_sent: u64,
    pub copies_lost: u64,
    /// Channel bytes, every copy counted.
    pub bytes_raw_sent: u64,
    pub bytes_payload_sent: u64,
    /// Copies this node decoded, whether addressed to it or relayed.
    pub frames_received: u64,
    /// First copies of fragments addressed to this node.
    pub frames_new: u64,
    pub duplicates: u64,
    pub conflicts: u64,
    pub decode_errors: u64,
    pub frames_forwarded: u64,
    pub frames_held: u64,
    pub frames_lost_inactive: u64,
    pub frames_lost_link_down: u64,
    pub datums_enqueued: u64,
    pub datums_rejected: u64,
    pub datums_resent: u64,
    /// Datums originated here and delivered somewhere.
    pub datums_delivered: u64,
    /// Datums reassembled here.
    pub datums_received: u64,
    pub bytes_goodput: u64,
    pub datums_dropped: BTreeMap<DropReason, u64>,
    pub energy: EnergyLedger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_tx_at: Option<Millis>,
    pub endurance_violation: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassMetrics {
    pub satellite: NodeId,
    pub window_start: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<Millis>,
    pub frames: u64,
    pub copies: u64,
    pub bytes_raw: u64,
    pub bytes_payload_sent: u64,
    /// Payload bytes of fragments first received at their destination.
    pub bytes_goodput: u64,
    pub duplicates: u64,
    /// Transmit energy only; standby between passes is excluded.
    pub energy_j: f64,
    /// Payload bytes sent per originating vehicle.
    pub payload_by_vehicle: BTreeMap<NodeId, u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatumTotals {
    pub enqueued: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Known once the run has ended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stored: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resident: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub nodes: BTreeMap<NodeId, NodeMetrics>,
    pub passes: Vec<PassMetrics>,
    pub datums: DatumTotals,
    pub dropped_by_reason: BTreeMap<DropReason, u64>,
    pub delivered_labels: BTreeMap<String, u64>,
    pub slots: Vec<SlotRecord>,
    pub assertions: Vec<ScriptOutcome>,
    pub endurance_violations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<Millis>,
}

impl Metrics {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> Self {
        let mut m = Metrics::default();
        for r in records {
            m.apply(r);
        }
        m
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeMetrics> {
        self.nodes.get(&id)
    }

    fn node_mut(&mut self, id: NodeId) -> &mut NodeMetrics {
        self.nodes.entry(id).or_default()
    }

    pub fn pass(&self, tag: PassTag) -> Option<&PassMetrics> {
        self.passes
            .iter()
            .find(|p| p.satellite == tag.satellite && p.window_start == tag.window_start)
    }

    fn pass_mut(&mut self, tag: PassTag) -> &mut PassMetrics {
        let i = match self
            .passes
            .iter()
            .position(|p| p.satellite == tag.satellite && p.window_start == tag.window_start)
        {
            Some(i) => i,
            None => {
                self.passes.push(PassMetrics {
                    satellite: tag.satellite,
                    window_start: tag.window_start,
                    ..Default::default()
                });
                self.passes.len() - 1
            }
        };
        &mut self.passes[i]
    }

    /// All scripted assertions observed what they expected.
    pub fn all_assertions_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn apply(&mut self, r: &LogRecord) {
        let node = r.node;
        match &r.detail {
            LogDetail::RunStart(h) => {
                self.scenario = h.scenario.clone();
                self.seed = h.seed;
                for n in &h.nodes {
                    self.node_mut(n.id);
                }
            }
            LogDetail::WindowOpen { satellite, start, end } => {
                let p = self.pass_mut(PassTag {
                    satellite: *satellite,
                    window_start: *start,
                });
                p.window_end = Some(*end);
            }
            LogDetail::WindowClose { .. } => {}
            LogDetail::SlotAssigned(s) => self.slots.push(s.clone()),
            LogDetail::Enqueue { attempt, .. } => {
                if let Some(n) = node {
                    let m = self.node_mut(n);
                    if *attempt == 0 {
                        m.datums_enqueued += 1;
                    } else {
                        m.datums_resent += 1;
                    }
                }
                if *attempt == 0 {
                    self.datums.enqueued += 1;
                }
            }
            LogDetail::EnqueueRejected { attempt, .. } => {
                if *attempt == 0 {
                    if let Some(n) = node {
                        let m = self.node_mut(n);
                        m.datums_enqueued += 1;
                        m.datums_rejected += 1;
                    }
                    self.datums.enqueued += 1;
                }
            }
            LogDetail::Transmit(t) => {
                let copies = t.copies.len() as u64;
                let lost = t.copies.iter().filter(|c| c.lost.is_some()).count() as u64;
                let frame_len = (t.frame.len() / 2) as u64;
                if let Some(n) = node {
                    let m = self.node_mut(n);
                    m.frames_sent += 1;
                    m.copies_sent += copies;
                    m.copies_lost += lost;
                    m.bytes_raw_sent += copies * frame_len;
                    m.bytes_payload_sent += t.payload_len as u64;
                    m.energy.tx_time_ms += t.airtime_ms;
                    m.energy.standby_time_ms += t.idle_ms;
                    m.energy.joules += t.energy_j;
                    m.last_tx_at = Some(r.t);
                }
                if let Some(tag) = t.pass {
                    let p = self.pass_mut(tag);
                    p.frames += 1;
                    p.copies += copies;
                    p.bytes_raw += copies * frame_len;
                    p.bytes_payload_sent += t.payload_len as u64;
                    p.energy_j += t.tx_energy_j;
                    *p.payload_by_vehicle.entry(t.datum.node).or_default() += t.payload_len as u64;
                }
            }
            LogDetail::FrameArrival(a) => {
                if let Some(n) = node {
                    let m = self.node_mut(n);
                    if a.outcome.received() {
                        m.frames_received += 1;
                    }
                    match &a.outcome {
                        ArrivalOutcome::Stored | ArrivalOutcome::Completed => m.frames_new += 1,
                        ArrivalOutcome::Duplicate => m.duplicates += 1,
                        ArrivalOutcome::Conflict => m.conflicts += 1,
                        ArrivalOutcome::Forwarded { .. } => m.frames_forwarded += 1,
                        ArrivalOutcome::Held { .. } => m.frames_held += 1,
                        ArrivalOutcome::DecodeError { .. } => m.decode_errors += 1,
                        ArrivalOutcome::NodeInactive => m.frames_lost_inactive += 1,
                        ArrivalOutcome::LinkDown => m.frames_lost_link_down += 1,
                    }
                }
                if let Some(tag) = a.pass {
                    if a.outcome.is_new() {
                        let bytes = a.payload_len.unwrap_or(0) as u64;
                        self.pass_mut(tag).bytes_goodput += bytes;
                    } else if a.outcome == ArrivalOutcome::Duplicate {
                        self.pass_mut(tag).duplicates += 1;
                    }
                }
            }
            LogDetail::StoreFlush { .. } | LogDetail::StoreExpired { .. } | LogDetail::ReassemblyEvicted { .. } => {}
            LogDetail::DatumDelivered { datum, label, bytes, .. } => {
                if let Some(n) = node {
                    let m = self.node_mut(n);
                    m.datums_received += 1;
                    m.bytes_goodput += *bytes as u64;
                }
                self.node_mut(datum.node).datums_delivered += 1;
                if let Some(l) = label {
                    *self.delivered_labels.entry(l.clone()).or_default() += 1;
                }
                self.datums.delivered += 1;
            }
            LogDetail::DatumDropped { datum, reason, .. } => {
                *self.node_mut(datum.node).datums_dropped.entry(*reason).or_default() += 1;
                *self.dropped_by_reason.entry(*reason).or_default() += 1;
                self.datums.dropped += 1;
            }
            LogDetail::LinkState { .. } | LogDetail::ScriptAction { .. } => {}
            LogDetail::ScriptResult(o) => self.assertions.push(o.clone()),
            LogDetail::EnduranceViolation { .. } => {
                if let Some(n) = node {
                    self.node_mut(n).endurance_violation = true;
                }
                self.endurance_violations += 1;
            }
            LogDetail::RunEnd(s) => {
                for f in &s.standby {
                    let m = self.node_mut(f.node);
                    m.energy.standby_time_ms += f.idle_ms;
                    m.energy.joules += f.energy_j;
                }
                self.datums.stored = Some(s.stored);
                self.datums.resident = Some(s.resident);
                self.ended_at = Some(r.t);
            }
        }
    }
}

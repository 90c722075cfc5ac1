//! Uplink slot schedulers for several vehicles sharing one satellite pass.
//!
//! Every scheduler carves a [`PassWindow`] into contiguous, disjoint slots
//! measured in whole transmit quanta (one fragment with all its redundant
//! copies). Schedulers are looked up by name from a [`SchedulerRegistry`]
//! so scenarios can pick one in their config.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::orbit::PassWindow;
use crate::{Millis, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VehicleDemand {
    pub vehicle: NodeId,
    pub queued_bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub vehicle: NodeId,
    pub quanta: u64,
    /// `None` when the vehicle gets no airtime in this window.
    pub slot: Option<(Millis, Millis)>,
}

pub trait UplinkScheduler: Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of quanta granted to each demand, in input order. The sum must
    /// not exceed `total_quanta`.
    fn allocate(&self, demands: &[VehicleDemand], total_quanta: u64) -> Vec<u64>;

    fn assign(&self, demands: &[VehicleDemand], window: &PassWindow, quantum: Millis) -> Vec<SlotAssignment> {
        assert!(quantum > 0, "quantum must be positive");
        let total = (window.duration() / quantum) as u64;
        let quanta = self.allocate(demands, total);
        debug_assert!(quanta.iter().sum::<u64>() <= total);
        let mut cursor = window.start;
        demands
            .iter()
            .zip(quanta)
            .map(|(d, q)| {
                let slot = (q > 0).then(|| {
                    let s = (cursor, cursor + q as Millis * quantum);
                    cursor = s.1;
                    s
                });
                SlotAssignment {
                    vehicle: d.vehicle,
                    quanta: q,
                    slot,
                }
            })
            .collect()
    }
}

impl fmt::Debug for dyn UplinkScheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("UplinkScheduler").field(&self.name()).finish()
    }
}

/// Splits the window in proportion to queued bytes. Quanta left over after
/// flooring go one at a time to the largest fractional remainders, ties to
/// the larger queue, so equal queues never differ by more than one quantum.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProportionalScheduler;

impl UplinkScheduler for ProportionalScheduler {
    fn name(&self) -> &'static str {
        "proportional"
    }

    fn allocate(&self, demands: &[VehicleDemand], total_quanta: u64) -> Vec<u64> {
        let total_demand: u128 = demands.iter().map(|d| d.queued_bytes as u128).sum();
        if total_demand == 0 {
            return vec![0; demands.len()];
        }
        let q = total_quanta as u128;
        let mut shares: Vec<u64> = demands
            .iter()
            .map(|d| (q * d.queued_bytes as u128 / total_demand) as u64)
            .collect();
        let leftover = total_quanta - shares.iter().sum::<u64>();
        let mut order: Vec<usize> = (0..demands.len()).filter(|&i| demands[i].queued_bytes > 0).collect();
        order.sort_by(|&a, &b| {
            let ra = q * demands[a].queued_bytes as u128 % total_demand;
            let rb = q * demands[b].queued_bytes as u128 % total_demand;
            rb.cmp(&ra)
                .then(demands[b].queued_bytes.cmp(&demands[a].queued_bytes))
                .then(a.cmp(&b))
        });
        for &i in order.iter().take(leftover as usize) {
            shares[i] += 1;
        }
        shares
    }
}

/// Equal split among vehicles with anything queued, regardless of volume.
#[derive(Clone, Copy, Debug, Default)]
pub struct EqualShareScheduler;

impl UplinkScheduler for EqualShareScheduler {
    fn name(&self) -> &'static str {
        "equal"
    }

    fn allocate(&self, demands: &[VehicleDemand], total_quanta: u64) -> Vec<u64> {
        let active = demands.iter().filter(|d| d.queued_bytes > 0).count() as u64;
        if active == 0 {
            return vec![0; demands.len()];
        }
        let base = total_quanta / active;
        let mut extra = total_quanta % active;
        demands
            .iter()
            .map(|d| {
                if d.queued_bytes == 0 {
                    return 0;
                }
                if extra > 0 {
                    extra -= 1;
                    base + 1
                } else {
                    base
                }
            })
            .collect()
    }
}

/// Name-keyed collection of schedulers.
pub struct SchedulerRegistry {
    schedulers: BTreeMap<&'static str, Box<dyn UplinkScheduler>>,
}

impl SchedulerRegistry {
    pub fn empty() -> Self {
        SchedulerRegistry {
            schedulers: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ProportionalScheduler));
        r.register(Box::new(EqualShareScheduler));
        r
    }

    pub fn register(&mut self, s: Box<dyn UplinkScheduler>) {
        self.schedulers.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Option<&dyn UplinkScheduler> {
        self.schedulers.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.schedulers.keys().copied()
    }
}

impl Default for SchedulerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Proportional slot assignment over one shared window.
pub fn schedule_multi_vehicle(demands: &[VehicleDemand], window: &PassWindow, quantum: Millis) -> Vec<SlotAssignment> {
    ProportionalScheduler.assign(demands, window, quantum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(len: Millis) -> PassWindow {
        PassWindow {
            start: 1_000,
            end: 1_000 + len,
            satellite_id: NodeId(2),
        }
    }

    fn demands(bytes: &[u64]) -> Vec<VehicleDemand> {
        bytes
            .iter()
            .enumerate()
            .map(|(i, &b)| VehicleDemand {
                vehicle: NodeId(10 + i as u8),
                queued_bytes: b,
            })
            .collect()
    }

    #[test]
    fn single_vehicle_gets_whole_window() {
        let a = schedule_multi_vehicle(&demands(&[500]), &window(300_000), 856);
        assert_eq!(a[0].quanta, 350);
        assert_eq!(a[0].slot, Some((1_000, 1_000 + 350 * 856)));
    }

    #[test]
    fn two_equal_queues_split_evenly() {
        let a = schedule_multi_vehicle(&demands(&[9000, 9000]), &window(300_000), 856);
        let lens: Vec<_> = a.iter().map(|s| s.slot.map(|(x, y)| y - x).unwrap()).collect();
        for l in &lens {
            assert!((l - 150_000).abs() <= 856, "{l}");
        }
        assert_eq!(a[0].slot.unwrap().1, a[1].slot.unwrap().0);
    }

    #[test]
    fn zero_demand_gets_nothing() {
        let a = schedule_multi_vehicle(&demands(&[0, 100, 100]), &window(300_000), 856);
        assert_eq!(a[0].slot, None);
        assert_eq!(a[0].quanta, 0);
        assert_eq!(a[1].quanta + a[2].quanta, 350);
        let none = schedule_multi_vehicle(&demands(&[0, 0]), &window(300_000), 856);
        assert!(none.iter().all(|s| s.slot.is_none()));
    }

    #[test]
    fn registry_lookup() {
        let r = SchedulerRegistry::with_builtins();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["equal", "proportional"]);
        assert!(r.get("proportional").is_some());
        assert!(r.get("round_robin").is_none());
        let eq = r.get("equal").unwrap().assign(&demands(&[1, 1000, 0]), &window(3_000), 1_000);
        assert_eq!(eq.iter().map(|s| s.quanta).collect::<Vec<_>>(), vec![2, 1, 0]);
    }

    proptest! {
        #[test]
        fn slots_disjoint_and_contained(bytes in proptest::collection::vec(0u64..50_000, 1..6), len in 0i64..600_000, quantum in 1i64..5_000, equal: bool) {
            let w = window(len);
            let d = demands(&bytes);
            let sched: &dyn UplinkScheduler = if equal { &EqualShareScheduler } else { &ProportionalScheduler };
            let a = sched.assign(&d, &w, quantum);
            let mut slots: Vec<_> = a.iter().filter_map(|s| s.slot).collect();
            slots.sort();
            for s in &slots {
                prop_assert!(s.0 >= w.start && s.1 <= w.end && s.0 < s.1);
            }
            for pair in slots.windows(2) {
                prop_assert!(pair[0].1 <= pair[1].0);
            }
            let total: u64 = a.iter().map(|s| s.quanta).sum();
            if bytes.iter().any(|&b| b > 0) {
                prop_assert_eq!(total, (len / quantum) as u64);
            } else {
                prop_assert_eq!(total, 0);
            }
        }

        #[test]
        fn equal_queues_within_one_quantum(n in 2usize..6, b in 1u64..100_000, len in 0i64..600_000) {
            let a = schedule_multi_vehicle(&demands(&vec![b; n]), &window(len), 856);
            let max = a.iter().map(|s| s.quanta).max().unwrap();
            let min = a.iter().map(|s| s.quanta).min().unwrap();
            prop_assert!(max - min <= 1);
        }
    }
}

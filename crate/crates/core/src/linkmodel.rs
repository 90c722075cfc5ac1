//! Radio profiles and link arithmetic.
//!
//! Rates are integer bits per second and durations integer milliseconds so
//! that airtime and capacity figures are exact. Airtime rounds up to the
//! next whole millisecond.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fragproto::HEADER_LEN;
use crate::Millis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("profile {name}: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("payload per frame {payload} out of range 1..={max}")]
    PayloadOutOfRange { payload: u32, max: u32 },
    #[error("negative duration {0} ms")]
    NegativeDuration(Millis),
}

/// Per-system link constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RadioProfile {
    pub name: String,
    /// Bytes per over-the-air message, header included.
    pub frame_bytes: u32,
    pub air_rate_bps: u32,
    /// Copies transmitted per fragment.
    pub redundancy: u32,
    pub tx_power_w: f64,
    pub standby_power_w: f64,
    /// Host-to-radio serial rate.
    pub feed_rate_bps: u32,
    #[serde(default)]
    pub per_copy_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_per_message: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_altitude_km: Option<f64>,
    /// Published per-pass uplink volume, kept for comparison only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_pass_bytes: Option<u64>,
}

pub const HUMSAT: &str = "HUMSAT";
pub const IRIDIUM_SBD: &str = "IRIDIUM_SBD";
pub const ARGOS: &str = "ARGOS";
pub const INMARSAT_M2M: &str = "INMARSAT_M2M";

impl RadioProfile {
    pub fn validate(&self) -> Result<(), LinkError> {
        let bad = |reason: &str| {
            Err(LinkError::InvalidProfile {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.frame_bytes < HEADER_LEN as u32 + 1 {
            return bad("frame_bytes must be at least 7");
        }
        if self.air_rate_bps == 0 {
            return bad("air_rate_bps must be positive");
        }
        if self.feed_rate_bps == 0 {
            return bad("feed_rate_bps must be positive");
        }
        if self.redundancy == 0 {
            return bad("redundancy must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.per_copy_loss) {
            return bad("per_copy_loss must lie in [0, 1]");
        }
        if !(self.tx_power_w >= 0.0) || !(self.standby_power_w >= 0.0) {
            return bad("powers must be non-negative");
        }
        Ok(())
    }

    /// Airtime of one over-the-air copy at the air rate.
    pub fn frame_airtime(&self) -> Millis {
        airtime_at(self.frame_bytes, self.air_rate_bps)
    }

    /// Airtime of one copy through the slower of the feed and air paths.
    pub fn effective_frame_airtime(&self) -> Millis {
        airtime_at(self.frame_bytes, self.air_rate_bps.min(self.feed_rate_bps))
    }

    /// Time to send all redundant copies of one fragment back to back.
    pub fn fragment_airtime(&self) -> Millis {
        self.effective_frame_airtime() * self.redundancy as Millis
    }

    /// Payload capacity of one frame under the fragment header.
    pub fn payload_capacity(&self) -> u32 {
        self.frame_bytes.saturating_sub(HEADER_LEN as u32)
    }

    /// Raw over-the-air bytes that fit in `window` ms, redundant copies
    /// included.
    pub fn pass_capacity(&self, window: Millis) -> u64 {
        if window <= 0 {
            return 0;
        }
        (window as u64 * self.air_rate_bps as u64) / 8000
    }

    /// Payload bytes delivered by whole fragments (all copies) in `window`.
    pub fn pass_goodput(&self, window: Millis, payload_per_frame: u32) -> Result<u64, LinkError> {
        let max = self.payload_capacity();
        if payload_per_frame == 0 || payload_per_frame > max {
            return Err(LinkError::PayloadOutOfRange {
                payload: payload_per_frame,
                max,
            });
        }
        if window < 0 {
            return Err(LinkError::NegativeDuration(window));
        }
        let fragments = window / self.fragment_airtime();
        Ok(fragments as u64 * payload_per_frame as u64)
    }

    /// Probability that at least one copy of a fragment survives i.i.d. loss.
    pub fn delivery_probability(&self) -> f64 {
        1.0 - self.per_copy_loss.powi(self.redundancy as i32)
    }
}

fn airtime_at(frame_bytes: u32, rate_bps: u32) -> Millis {
    let bits_ms = frame_bytes as u64 * 8 * 1000;
    bits_ms.div_ceil(rate_bps as u64) as Millis
}

/// Comparison presets. Only HUMSAT is used as a DTN channel by default.
pub fn builtin_profiles() -> BTreeMap<String, RadioProfile> {
    let profiles = [
        RadioProfile {
            name: HUMSAT.into(),
            frame_bytes: 32,
            air_rate_bps: 1200,
            redundancy: 4,
            tx_power_w: 3.2,
            standby_power_w: 0.14,
            feed_rate_bps: 9600,
            per_copy_loss: 0.0,
            cost_per_message: None,
            orbit_altitude_km: Some(600.0),
            reference_pass_bytes: None,
        },
        RadioProfile {
            name: IRIDIUM_SBD.into(),
            frame_bytes: 50,
            air_rate_bps: 2400,
            redundancy: 1,
            tx_power_w: 1.0,
            standby_power_w: 0.0,
            feed_rate_bps: 2400,
            per_copy_loss: 0.0,
            cost_per_message: Some(0.14),
            orbit_altitude_km: Some(780.0),
            reference_pass_bytes: None,
        },
        RadioProfile {
            name: ARGOS.into(),
            frame_bytes: 31,
            air_rate_bps: 400,
            redundancy: 1,
            tx_power_w: 1.0,
            standby_power_w: 0.0,
            feed_rate_bps: 400,
            per_copy_loss: 0.0,
            cost_per_message: None,
            orbit_altitude_km: Some(800.0),
            reference_pass_bytes: Some(3100),
        },
        RadioProfile {
            name: INMARSAT_M2M.into(),
            frame_bytes: 6400,
            // No published data rate for the data service; the terminal's
            // 100 kbit/s ceiling stands in.
            air_rate_bps: 100_000,
            redundancy: 1,
            tx_power_w: 9.0,
            standby_power_w: 0.0,
            feed_rate_bps: 100_000,
            per_copy_loss: 0.0,
            cost_per_message: None,
            orbit_altitude_km: Some(35_800.0),
            reference_pass_bytes: None,
        },
    ];
    profiles.into_iter().map(|p| (p.name.clone(), p)).collect()
}

/// Accumulated radio time and energy for one node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EnergyLedger {
    pub tx_time_ms: Millis,
    pub standby_time_ms: Millis,
    pub joules: f64,
}

impl EnergyLedger {
    /// Adds transmit and idle time; returns the joules added.
    pub fn accrue(&mut self, profile: &RadioProfile, tx_ms: Millis, idle_ms: Millis) -> f64 {
        debug_assert!(tx_ms >= 0 && idle_ms >= 0);
        self.tx_time_ms += tx_ms;
        self.standby_time_ms += idle_ms;
        let joules = energy_of(profile, tx_ms, idle_ms);
        self.joules += joules;
        joules
    }

    pub fn total_time_ms(&self) -> Millis {
        self.tx_time_ms + self.standby_time_ms
    }
}

/// Energy drawn by `tx_ms` of transmission and `idle_ms` of standby.
pub fn energy_of(profile: &RadioProfile, tx_ms: Millis, idle_ms: Millis) -> f64 {
    profile.tx_power_w * tx_ms as f64 / 1000.0 + profile.standby_power_w * idle_ms as f64 / 1000.0
}

/// Functional form of [`EnergyLedger::accrue`].
pub fn accrue_energy(
    ledger: EnergyLedger,
    profile: &RadioProfile,
    tx_ms: Millis,
    idle_ms: Millis,
) -> Result<EnergyLedger, LinkError> {
    if tx_ms < 0 {
        return Err(LinkError::NegativeDuration(tx_ms));
    }
    if idle_ms < 0 {
        return Err(LinkError::NegativeDuration(idle_ms));
    }
    let mut next = ledger;
    next.accrue(profile, tx_ms, idle_ms);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn humsat() -> RadioProfile {
        builtin_profiles()[HUMSAT].clone()
    }

    #[test]
    fn presets() {
        let p = builtin_profiles();
        assert_eq!(p[HUMSAT].frame_bytes, 32);
        assert_eq!(p[HUMSAT].air_rate_bps, 1200);
        assert_eq!(p[HUMSAT].redundancy, 4);
        assert_eq!(p[HUMSAT].feed_rate_bps, 9600);
        assert_eq!(p[IRIDIUM_SBD].frame_bytes, 50);
        assert_eq!(p[ARGOS].air_rate_bps, 400);
        assert_eq!(p[INMARSAT_M2M].frame_bytes, 6400);
        for prof in p.values() {
            prof.validate().unwrap();
        }
    }

    #[test]
    fn airtime() {
        let p = builtin_profiles();
        assert_eq!(p[HUMSAT].frame_airtime(), 214);
        assert_eq!(p[ARGOS].frame_airtime(), 620);
        assert_eq!(p[HUMSAT].effective_frame_airtime(), 214);
        let mut slow_feed = humsat();
        slow_feed.feed_rate_bps = 600;
        assert_eq!(slow_feed.effective_frame_airtime(), 427);
    }

    #[test]
    fn invalid_profiles() {
        let mut p = humsat();
        p.frame_bytes = 0;
        assert!(p.validate().is_err());
        p.frame_bytes = 6;
        assert!(p.validate().is_err());
        p.frame_bytes = 7;
        assert!(p.validate().is_ok());
        p.redundancy = 0;
        assert!(p.validate().is_err());
        let mut q = humsat();
        q.per_copy_loss = 1.5;
        assert!(q.validate().is_err());
    }

    #[test]
    fn capacity() {
        let p = builtin_profiles();
        assert_eq!(p[HUMSAT].pass_capacity(300_000), 45_000);
        assert_eq!(p[HUMSAT].pass_capacity(0), 0);
        assert_eq!(p[ARGOS].pass_capacity(62_000), 3100);
    }

    #[test]
    fn goodput() {
        let h = humsat();
        assert_eq!(h.pass_goodput(300_000, 26).unwrap(), 9100);
        assert_eq!(h.pass_goodput(0, 26).unwrap(), 0);
        let mut single = h.clone();
        single.redundancy = 1;
        assert_eq!(single.pass_goodput(300_000, 26).unwrap(), 36426);
        assert!(h.pass_goodput(300_000, 27).is_err());
        assert!(h.pass_goodput(300_000, 0).is_err());
    }

    // Counting oracle: walk a window fragment by fragment, sending all copies
    // only when they finish inside it.
    fn goodput_by_counting(p: &RadioProfile, window: Millis, payload: u32) -> u64 {
        let copy = p.effective_frame_airtime();
        let mut t = 0;
        let mut delivered = 0u64;
        loop {
            let mut end = t;
            for _ in 0..p.redundancy {
                end += copy;
            }
            if end > window {
                break;
            }
            delivered += payload as u64;
            t = end;
        }
        delivered
    }

    #[test]
    fn delivery_probability_examples() {
        let mut p = humsat();
        p.per_copy_loss = 0.0;
        assert_eq!(p.delivery_probability(), 1.0);
        p.per_copy_loss = 1.0;
        assert_eq!(p.delivery_probability(), 0.0);
        p.per_copy_loss = 0.5;
        assert!((p.delivery_probability() - 0.9375).abs() < 1e-12);
    }

    #[test]
    fn delivery_probability_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let trials = 1_000_000;
        let delivered = (0..trials)
            .filter(|_| (0..4).any(|_| rng.gen::<f64>() >= 0.5))
            .count();
        let rate = delivered as f64 / trials as f64;
        assert!((rate - 0.9375).abs() < 0.002, "rate {rate}");
    }

    #[test]
    fn energy_examples() {
        let h = humsat();
        let l = accrue_energy(EnergyLedger::default(), &h, 300_000, 0).unwrap();
        assert!((l.joules - 960.0).abs() < 1e-9);
        let l = accrue_energy(EnergyLedger::default(), &h, 0, 1_000_000).unwrap();
        assert!((l.joules - 140.0).abs() < 1e-9);
        let l0 = EnergyLedger::default();
        assert_eq!(accrue_energy(l0, &h, 0, 0).unwrap(), l0);
        assert!(accrue_energy(l0, &h, -1, 0).is_err());
    }

    proptest! {
        #[test]
        fn capacity_monotone(w in 0i64..10_000_000, dw in 0i64..100_000, rate in 1u32..100_000, dr in 0u32..1000) {
            let mut p = humsat();
            p.air_rate_bps = rate;
            let base = p.pass_capacity(w);
            prop_assert!(p.pass_capacity(w + dw) >= base);
            p.air_rate_bps = rate + dr;
            prop_assert!(p.pass_capacity(w) >= base);
        }

        #[test]
        fn goodput_matches_counting(w in 0i64..400_000, red in 1u32..6, payload in 1u32..=26, feed in 300u32..20_000) {
            let mut p = humsat();
            p.redundancy = red;
            p.feed_rate_bps = feed;
            prop_assert_eq!(p.pass_goodput(w, payload).unwrap(), goodput_by_counting(&p, w, payload));
        }

        #[test]
        fn goodput_bounded_by_capacity(w in 0i64..1_000_000, red in 1u32..6, payload in 1u32..=26) {
            let mut p = humsat();
            p.redundancy = red;
            let g = p.pass_goodput(w, payload).unwrap() as f64;
            let bound = p.pass_capacity(w) as f64 / red as f64 * payload as f64 / p.frame_bytes as f64;
            prop_assert!(g <= bound + payload as f64);
        }

        #[test]
        fn delivery_monotone(loss in 0.0f64..=1.0, dl in 0.0f64..0.5, red in 1u32..8) {
            let mut p = humsat();
            p.per_copy_loss = loss;
            p.redundancy = red;
            let base = p.delivery_probability();
            p.redundancy = red + 1;
            prop_assert!(p.delivery_probability() >= base - 1e-15);
            p.redundancy = red;
            p.per_copy_loss = (loss + dl).min(1.0);
            prop_assert!(p.delivery_probability() <= base + 1e-15);
        }

        #[test]
        fn energy_identity(steps in proptest::collection::vec((0i64..100_000, 0i64..100_000), 0..20)) {
            let p = humsat();
            let mut l = EnergyLedger::default();
            for (tx, idle) in &steps {
                l.accrue(&p, *tx, *idle);
            }
            let expect = p.tx_power_w * l.tx_time_ms as f64 / 1000.0 + p.standby_power_w * l.standby_time_ms as f64 / 1000.0;
            prop_assert!((l.joules - expect).abs() <= 1e-9 * expect.max(1.0));
        }
    }
}

//! Satellite visibility from the reduced three-parameter ephemeris.
//!
//! A satellite is visible for `window` milliseconds once per `period`,
//! starting at `last_passage` and recurring in both directions of time.
//! All arithmetic is exact integer math on milliseconds; windows are
//! half-open `[start, end)`.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Millis, NodeId};

/// Equatorial Earth radius, km (WGS-84).
pub const EARTH_RADIUS_KM: f64 = 6378.137;
/// Earth gravitational parameter, km³/s².
pub const EARTH_MU_KM3_S2: f64 = 398_600.441_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("period must be positive (got {0} ms)")]
    NonPositivePeriod(Millis),
    #[error("window must satisfy 0 < window <= period (window {window} ms, period {period} ms)")]
    BadWindow { window: Millis, period: Millis },
    #[error("invalid range: from {from} > to {to}")]
    InvalidRange { from: Millis, to: Millis },
    #[error("altitude must be positive (got {0} km)")]
    NonPositiveAltitude(f64),
}

/// Periodic visibility model for one satellite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct OrbitEphemeris {
    pub satellite_id: NodeId,
    #[serde(rename = "last_passage_ms")]
    pub last_passage: Millis,
    #[serde(rename = "period_ms")]
    pub period: Millis,
    #[serde(rename = "window_ms")]
    pub window: Millis,
}

/// One materialised communication window `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct PassWindow {
    pub start: Millis,
    pub end: Millis,
    pub satellite_id: NodeId,
}

impl PassWindow {
    pub fn duration(&self) -> Millis {
        self.end - self.start
    }

    pub fn contains(&self, t: Millis) -> bool {
        self.start <= t && t < self.end
    }

    /// Overlap test against the closed interval `[from, to]`.
    pub fn overlaps(&self, from: Millis, to: Millis) -> bool {
        self.start <= to && self.end > from
    }
}

impl OrbitEphemeris {
    pub fn new(
        satellite_id: NodeId,
        last_passage: Millis,
        period: Millis,
        window: Millis,
    ) -> Result<Self, OrbitError> {
        let eph = OrbitEphemeris {
            satellite_id,
            last_passage,
            period,
            window,
        };
        eph.validate()?;
        Ok(eph)
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        if self.period <= 0 {
            return Err(OrbitError::NonPositivePeriod(self.period));
        }
        if self.window <= 0 || self.window > self.period {
            return Err(OrbitError::BadWindow {
                window: self.window,
                period: self.period,
            });
        }
        Ok(())
    }

    /// Position of `t` within the orbital cycle, normalised to `[0, period)`.
    pub fn phase(&self, t: Millis) -> Millis {
        (t - self.last_passage).rem_euclid(self.period)
    }

    pub fn is_visible(&self, t: Millis) -> bool {
        self.phase(t) < self.window
    }

    /// Earliest window whose end lies after `t`. If `t` is inside a window,
    /// that window is returned.
    pub fn next_window(&self, t: Millis) -> PassWindow {
        let phase = self.phase(t);
        let cycle_start = t - phase;
        let start = if phase < self.window {
            cycle_start
        } else {
            cycle_start + self.period
        };
        self.window_at(start)
    }

    /// Remaining visible time at `t`, or `None` outside a window.
    pub fn remaining_in_window(&self, t: Millis) -> Option<Millis> {
        let phase = self.phase(t);
        (phase < self.window).then(|| self.window - phase)
    }

    /// All windows overlapping the closed interval `[from, to]`, by start.
    pub fn windows_between(&self, from: Millis, to: Millis) -> Result<Vec<PassWindow>, OrbitError> {
        if from > to {
            return Err(OrbitError::InvalidRange { from, to });
        }
        let mut out = Vec::new();
        let mut w = self.next_window(from);
        while w.start <= to {
            out.push(w);
            w = self.window_at(w.start + self.period);
        }
        Ok(out)
    }

    fn window_at(&self, start: Millis) -> PassWindow {
        PassWindow {
            start,
            end: start + self.window,
            satellite_id: self.satellite_id,
        }
    }
}

/// Circular-orbit period in seconds for an altitude above the equatorial
/// radius.
pub fn period_from_altitude(altitude_km: f64) -> Result<f64, OrbitError> {
    if !(altitude_km > 0.0) || !altitude_km.is_finite() {
        return Err(OrbitError::NonPositiveAltitude(altitude_km));
    }
    let a = EARTH_RADIUS_KM + altitude_km;
    Ok(2.0 * std::f64::consts::PI * (a * a * a / EARTH_MU_KM3_S2).sqrt())
}

//! Point-mass waypoint pursuit in a local tangent plane.

use std::collections::VecDeque;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::Millis;

/// Airframe limits. Defaults describe the X8 flying wing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Airframe {
    pub model: String,
    pub min_speed_mps: f64,
    pub cruise_speed_mps: f64,
    pub max_speed_mps: f64,
    pub max_altitude_m: f64,
    pub endurance_ms: Millis,
    /// Leg switching distance; also the loiter radius.
    pub capture_radius_m: f64,
    pub max_range_m: f64,
    /// Head, cross and gust tolerance. Recorded only, wind is not simulated.
    pub wind_tolerance_mps: [f64; 3],
}

impl Default for Airframe {
    fn default() -> Self {
        Airframe {
            model: "X8".into(),
            min_speed_mps: 15.0,
            cruise_speed_mps: 18.0,
            max_speed_mps: 23.0,
            max_altitude_m: 350.0,
            endurance_ms: 50 * 60 * 1000,
            capture_radius_m: 31.0,
            max_range_m: 20_000.0,
            wind_tolerance_mps: [17.0, 15.0, 19.0],
        }
    }
}

impl Airframe {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.min_speed_mps > 0.0
            && self.min_speed_mps <= self.cruise_speed_mps
            && self.cruise_speed_mps <= self.max_speed_mps
            && self.max_altitude_m > 0.0
            && self.endurance_ms > 0
            && self.capture_radius_m >= 0.0;
        if ok {
            Ok(())
        } else {
            Err("need 0 < min <= cruise <= max speed, positive altitude and endurance".into())
        }
    }

    pub fn check_speed(&self, s: f64) -> Result<(), String> {
        if s.is_finite() && (self.min_speed_mps..=self.max_speed_mps).contains(&s) {
            Ok(())
        } else {
            Err(format!(
                "speed {s} outside [{}, {}] m/s",
                self.min_speed_mps, self.max_speed_mps
            ))
        }
    }

    pub fn check_altitude(&self, z: f64) -> Result<(), String> {
        if z.is_finite() && (0.0..=self.max_altitude_m).contains(&z) {
            Ok(())
        } else {
            Err(format!("altitude {z} outside [0, {}] m", self.max_altitude_m))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MotionError {
    #[error("time step must be positive, got {0} ms")]
    NonPositiveStep(Millis),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: [f64; 3],
    pub speed: f64,
    /// Remaining legs; the last one is kept as the loiter point.
    pub waypoints: VecDeque<[f64; 3]>,
    pub battery_j: f64,
    pub airborne_since: Option<Millis>,
    /// Following the waypoint list rather than holding position.
    pub executing: bool,
}

impl VehicleState {
    pub fn parked(position: [f64; 3], speed: f64, battery_j: f64) -> Self {
        VehicleState {
            position,
            speed,
            waypoints: VecDeque::new(),
            battery_j,
            airborne_since: None,
            executing: false,
        }
    }

    pub fn airborne(&self) -> bool {
        self.airborne_since.is_some()
    }

    /// At the final waypoint with nothing left to fly.
    pub fn loitering(&self) -> bool {
        self.airborne()
            && match (self.waypoints.len(), self.waypoints.front()) {
                (0, _) => true,
                (1, Some(w)) => distance(&self.position, w) < 1e-9,
                _ => false,
            }
    }

    pub fn velocity(&self) -> [f64; 3] {
        if !self.executing || self.loitering() {
            return [0.0; 3];
        }
        match self.waypoints.front() {
            Some(w) => {
                let d = distance(&self.position, w);
                if d < 1e-9 {
                    return [0.0; 3];
                }
                let k = self.speed / d;
                [
                    (w[0] - self.position[0]) * k,
                    (w[1] - self.position[1]) * k,
                    (w[2] - self.position[2]) * k,
                ]
            }
            None => [0.0; 3],
        }
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Flies `dt` along the waypoint list at the commanded speed. A leg ends on
/// reaching its waypoint or on passing within the capture radius of it; the
/// final waypoint is held. Vehicles that are on the ground or not executing
/// stay where they are.
pub fn step_vehicle(v: &VehicleState, dt: Millis, airframe: &Airframe) -> Result<VehicleState, MotionError> {
    if dt <= 0 {
        return Err(MotionError::NonPositiveStep(dt));
    }
    let mut next = v.clone();
    if !v.airborne() || !v.executing {
        return Ok(next);
    }
    let speed = v.speed.clamp(airframe.min_speed_mps, airframe.max_speed_mps);
    let mut budget = speed * dt as f64 / 1000.0;
    while budget > 0.0 {
        let Some(&wp) = next.waypoints.front() else { break };
        let d = distance(&next.position, &wp);
        if d <= budget {
            next.position = wp;
            budget -= d;
            if next.waypoints.len() > 1 {
                next.waypoints.pop_front();
            } else {
                break;
            }
        } else {
            let k = budget / d;
            for i in 0..3 {
                next.position[i] += (wp[i] - next.position[i]) * k;
            }
            budget = 0.0;
            if next.waypoints.len() > 1 && distance(&next.position, &wp) <= airframe.capture_radius_m {
                next.waypoints.pop_front();
            }
        }
    }
    next.position[2] = next.position[2].clamp(0.0, airframe.max_altitude_m);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flying(pos: [f64; 3], wps: &[[f64; 3]]) -> VehicleState {
        VehicleState {
            waypoints: wps.iter().copied().collect(),
            airborne_since: Some(0),
            executing: true,
            ..VehicleState::parked(pos, 18.0, 1e5)
        }
    }

    #[test]
    fn captures_single_waypoint() {
        let v = flying([0.0, 0.0, 100.0], &[[180.0, 0.0, 100.0]]);
        let n = step_vehicle(&v, 10_000, &Airframe::default()).unwrap();
        assert_eq!(n.position, [180.0, 0.0, 100.0]);
        assert!(n.loitering());
        // holding at the loiter point
        let m = step_vehicle(&n, 10_000, &Airframe::default()).unwrap();
        assert_eq!(m.position, [180.0, 0.0, 100.0]);
    }

    #[test]
    fn zero_step_rejected() {
        let v = flying([0.0; 3], &[[1.0, 0.0, 0.0]]);
        assert_eq!(step_vehicle(&v, 0, &Airframe::default()), Err(MotionError::NonPositiveStep(0)));
    }

    #[test]
    fn capture_radius_switches_leg() {
        let v = flying([0.0, 0.0, 100.0], &[[200.0, 0.0, 100.0], [200.0, 500.0, 100.0]]);
        // 10 s at 18 m/s leaves 20 m to go, inside the 31 m radius
        let n = step_vehicle(&v, 10_000, &Airframe::default()).unwrap();
        assert_eq!(n.waypoints.len(), 1);
        assert_eq!(n.position, [180.0, 0.0, 100.0]);
    }

    #[test]
    fn grounded_vehicle_does_not_move() {
        let mut v = flying([0.0; 3], &[[100.0, 0.0, 0.0]]);
        v.airborne_since = None;
        assert_eq!(step_vehicle(&v, 5_000, &Airframe::default()).unwrap().position, [0.0; 3]);
    }

    proptest! {
        #[test]
        fn distance_bounded_by_speed(
            wps in proptest::collection::vec((-2000.0..2000.0f64, -2000.0..2000.0f64, 0.0..350.0f64), 1..6),
            speed in 15.0..23.0f64,
            dt in 1i64..60_000,
        ) {
            let wps: Vec<[f64; 3]> = wps.into_iter().map(|(x, y, z)| [x, y, z]).collect();
            let mut v = flying([0.0, 0.0, 100.0], &wps);
            v.speed = speed;
            let n = step_vehicle(&v, dt, &Airframe::default()).unwrap();
            let moved = distance(&v.position, &n.position);
            prop_assert!(moved <= speed * dt as f64 / 1000.0 + 1e-6);
            prop_assert!(n.position[2] >= 0.0 && n.position[2] <= 350.0);
            prop_assert!(!n.waypoints.is_empty());
        }
    }
}

use std::collections::BTreeSet;

use satdtn::scenarios::{self, CannedScenario, FieldTrialParams, ScenarioRegistry, BENCH_LABEL, SATELLITE, WORKSTATION};
use satdtn::sim::log::{ArrivalOutcome, LogDetail};
use satdtn::sim::{run, Outcome, RunOutput, ScenarioConfig};

fn observed(out: &RunOutput, name: &str) -> Outcome {
    out.metrics
        .assertions
        .iter()
        .find(|a| a.name == name)
        .unwrap_or_else(|| panic!("no step {name:?}"))
        .observed
}

#[test]
fn workbench_bench_datum_arrives_intact() {
    let cfg = scenarios::build_workbench();
    let out = run(&cfg).unwrap();
    assert!(out.assertions_passed());
    // bytes are compared against the original before a delivery is logged
    let bench = out.records.iter().find_map(|r| match &r.detail {
        LogDetail::DatumDelivered { label: Some(l), bytes, .. } if l == BENCH_LABEL => Some(*bytes),
        _ => None,
    });
    assert_eq!(bench, Some(45));
}

#[test]
fn workbench_total_loss_is_a_negative_control() {
    let out = run(&scenarios::build_workbench_with_loss(1.0)).unwrap();
    assert!(out.assertions_passed(), "expected failures should match");
    assert_eq!(observed(&out, "datum reconstructed"), Outcome::Fail);
    assert_eq!(out.metrics.datums.delivered, 0);
    let ws = out.metrics.node(WORKSTATION).map_or(0, |m| m.frames_received);
    assert_eq!(ws, 0);
}

#[test]
fn checklist_rows_are_labelled_and_unique() {
    for cfg in [scenarios::build_dry_run(), scenarios::build_field_trial(false)] {
        let rows: Vec<&str> = cfg.script.iter().filter(|s| !s.extension).map(|s| s.row.as_str()).collect();
        assert!(rows.iter().all(|r| !r.is_empty()), "{}", cfg.name);
        assert_eq!(rows.iter().collect::<BTreeSet<_>>().len(), rows.len(), "{}", cfg.name);
    }
}

#[test]
fn sdr_range_below_ground_distance_fails_the_check() {
    let cfg = scenarios::build_field_trial_with(&FieldTrialParams {
        sdr_range_m: 500.0,
        ..Default::default()
    });
    let out = run(&cfg).unwrap();
    assert_eq!(observed(&out, "check SDR range"), Outcome::Fail);
    assert!(!out.assertions_passed());
}

#[test]
fn empty_survey_plan_is_rejected() {
    let cfg = scenarios::build_field_trial_with(&FieldTrialParams {
        survey_plan: vec![],
        ..Default::default()
    });
    let err = run(&cfg).unwrap_err();
    assert!(err.to_string().contains("no waypoints"), "{err}");
}

#[test]
fn fleet_size_limits() {
    assert!(scenarios::build_multi_vehicle(0).is_err());
    assert!(scenarios::build_multi_vehicle(33).is_err());
    assert!(scenarios::build_multi_vehicle_relay(1).is_err());
}

#[test]
fn single_vehicle_gets_the_whole_window() {
    let cfg = scenarios::build_multi_vehicle(1).unwrap();
    let out = run(&cfg).unwrap();
    assert!(out.assertions_passed());
    let first = &out.metrics.slots[0];
    assert_eq!(first.assignments.len(), 1);
    // whole transmission groups only
    let (start, end) = first.assignments[0].slot.unwrap();
    assert_eq!(start, first.window_start);
    assert!(first.window_end - end < first.quantum_ms, "{first:?}");
    assert_eq!((end - start) % first.quantum_ms, 0);
}

#[test]
fn relay_vehicle_replaces_the_satellite() {
    let cfg = scenarios::build_multi_vehicle_relay(4).unwrap();
    let relay = *scenarios::fleet_ids(4).last().unwrap();
    let out = run(&cfg).unwrap();
    assert!(out.assertions_passed());
    assert_eq!(out.metrics.datums.delivered, 3);
    let mut via = BTreeSet::new();
    for r in &out.records {
        if let LogDetail::FrameArrival(a) = &r.detail {
            assert_ne!(r.node, Some(SATELLITE), "satellite is off");
            if let ArrivalOutcome::Forwarded { via: v, .. } = &a.outcome {
                via.insert((r.node.unwrap(), v.clone()));
            }
        }
    }
    assert!(via.contains(&(relay, scenarios::RELAY_LINK.to_string())), "{via:?}");
    // nothing leaves the relay before its side link is up
    let first_forward = out
        .records
        .iter()
        .find(|r| r.node == Some(relay) && matches!(&r.detail, LogDetail::FrameArrival(a) if matches!(a.outcome, ArrivalOutcome::Forwarded { .. })))
        .unwrap();
    assert!(first_forward.t >= scenarios::RELAY_LINK_UP_MS);
}

struct Custom;

impl CannedScenario for Custom {
    fn name(&self) -> &'static str {
        "workbench_half_loss"
    }
    fn description(&self) -> &'static str {
        "bench with half the copies lost"
    }
    fn build(&self) -> ScenarioConfig {
        let mut cfg = scenarios::build_workbench_with_loss(0.5);
        cfg.name = self.name().into();
        cfg
    }
}

#[test]
fn registry_accepts_new_scenarios() {
    let mut reg = ScenarioRegistry::with_builtins();
    let before = reg.names().count();
    reg.register(Box::new(Custom));
    assert_eq!(reg.names().count(), before + 1);
    let cfg = reg.get("workbench_half_loss").unwrap().build();
    cfg.validate().unwrap();
    let out = run(&cfg).unwrap();
    assert_eq!(out.metrics.scenario, "workbench_half_loss");
    assert!(ScenarioRegistry::empty().get("workbench").is_none());
}

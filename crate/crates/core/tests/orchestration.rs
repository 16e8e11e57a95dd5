// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::sync::Arc;

use ifusion_core::model::{id, ServiceIntent, ServiceState};
use ifusion_core::optical::OduRate;
use ifusion_core::scenario::{run_scenario, ScenarioFile};
use ifusion_core::sdtn::RerouteOutcome;
use ifusion_core::system::{FaultKind, FaultSpec};
use ifusion_core::topofile::REFNET;
use ifusion_core::{ErrorCode, System};

fn refnet() -> Arc<System> {
    System::from_json(REFNET).expect("refnet boots")
}

fn to_m3(mbps: u64) -> ServiceIntent {
    ServiceIntent::new(id("ip/R1:ge1"), id("mw/M3:eth0"), mbps)
}

fn modulation(sys: &System, link: &str, m: &str) {
    sys.inject(&FaultSpec {
        kind: FaultKind::Modulation,
        target: link.into(),
        value: Some(m.into()),
    })
    .unwrap();
}

fn saturate_r1(sys: &System) {
    sys.mutate(|s| {
        let none = BTreeSet::new();
        s.ip().provision_lsp(&id("ip/R1"), &id("ip/R2"), 10000, &none).unwrap();
        s.ip().provision_lsp(&id("ip/R1"), &id("ip/R3"), 10000, &none).unwrap();
    });
}

#[test]
fn saturated_ip_is_augmented_over_optical() {
    let sys = refnet();
    saturate_r1(&sys);
    let svc = sys
        .provision(&ServiceIntent::new(id("ip/R1:ge1"), id("ip/R3:ge1"), 5000))
        .unwrap();
    assert_eq!(svc.state, ServiceState::Active);
    let aug = sys.sdtn().augmented_links();
    assert_eq!(aug.len(), 1);
    assert!(!aug[0].flagged);
    let odu = sys.optical().odu(&aug[0].odu).unwrap();
    assert_eq!(odu.rate, OduRate::Odu2);
    assert_eq!((odu.a.render(), odu.z.render()), ("optical/O1:ad4".into(), "optical/O5:ad4".into()));
    assert_eq!(sys.sdtn().service_path(&svc.id).unwrap(), [aug[0].link.clone()]);
    let adj = sys.ip().adjacencies().into_iter().find(|a| a.id == aug[0].link).unwrap();
    assert_eq!((adj.te_metric, adj.capacity_mbps), (100, 10000));
    assert!(sys.audit().is_clean());

    // the augmented capacity outlives the service
    sys.teardown(&svc.id).unwrap();
    assert!(sys.optical().odu(&aug[0].odu).unwrap().state == ServiceState::Active);
    assert!(sys.audit().is_clean());
}

#[test]
fn small_demand_still_gets_odu2() {
    let sys = refnet();
    saturate_r1(&sys);
    sys.provision(&ServiceIntent::new(id("ip/R1:ge1"), id("ip/R3:ge1"), 100)).unwrap();
    let aug = &sys.sdtn().augmented_links()[0];
    assert_eq!(sys.optical().odu(&aug.odu).unwrap().rate, OduRate::Odu2);
}

#[test]
fn blocked_optical_leaves_ip_untouched() {
    let sys = refnet();
    saturate_r1(&sys);
    // fill every wavelength leaving O1
    sys.mutate(|s| {
        for _ in 0..8 {
            let _ = s.optical().setup_och(&id("optical/O1:ad1"), &id("optical/O4:ad1"));
        }
    });
    let ip_before = sys.ip().topology();
    let err = sys
        .provision(&ServiceIntent::new(id("ip/R1:ge1"), id("ip/R3:ge1"), 5000))
        .unwrap_err();
    assert_eq!(err.code(), ErrorCode::OpticalBlocked);
    assert_eq!(sys.ip().topology(), ip_before);
    assert!(sys.services().1.is_empty());
    assert_eq!(sys.metrics().blocked, 1);
}

#[test]
fn capacity_drop_within_bookings_is_ignored() {
    let sys = refnet();
    sys.provision(&to_m3(50)).unwrap();
    modulation(&sys, "mw/M1-M2", "QPSK");
    assert_eq!(sys.mw().effective_capacity(&id("mw/M1-M2")).unwrap(), 100);
    assert!(sys.reroute_reports().is_empty());
}

#[test]
fn overbooked_drop_reroutes_lowest_id_first() {
    let sys = refnet();
    let first = sys.provision(&to_m3(80)).unwrap();
    let second = sys.provision(&to_m3(80)).unwrap();
    modulation(&sys, "mw/M1-M2", "QPSK");
    let reports = sys.reroute_reports();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].outcomes, [(first.id.clone(), RerouteOutcome::Failed)]);
    assert_eq!(sys.service(&first.id).1.unwrap().state, ServiceState::Failed);
    assert_eq!(sys.service(&second.id).1.unwrap().state, ServiceState::Active);
    assert!(sys.mw().allocated_on(&id("mw/M1-M2")) <= 100);
    assert!(sys.audit().is_clean());

    // recovery upward never triggers work
    modulation(&sys, "mw/M1-M2", "QAM256");
    assert_eq!(sys.reroute_reports().len(), 1);
}

#[test]
fn out_of_range_modulation_is_quarantined() {
    let sys = refnet();
    modulation(&sys, "mw/M1-M2", "QAM1024");
    let link = sys.mw().link(&id("mw/M1-M2")).unwrap();
    assert!(link.quarantined);
    assert!(sys.event_errors().iter().any(|e| e.contains("outside configured range")));
}

#[test]
fn scenario_round_trip_passes() {
    let sys = refnet();
    let sc = ScenarioFile::parse(
        r#"{"steps": [
            {"id": "p", "action": "provision", "from": "ip/R1:ge1", "to": "mw/M3:eth0", "mbps": 100, "as": "svc"},
            {"id": "a1", "action": "assert", "predicate": "state-equals", "service": "svc", "state": "ACTIVE"},
            {"id": "a2", "action": "assert", "predicate": "path-equals", "service": "svc",
             "path": ["ip/R1-R2", "ip/R2-R3", "ip/R3-R4", "sdtn/R4-M1", "mw/M1-M2", "mw/M2-M3"]},
            {"id": "a3", "action": "assert", "predicate": "capacity-equals", "link": "mw/M2-M3", "mbps": 403},
            {"id": "t", "action": "teardown", "service": "svc"},
            {"id": "a4", "action": "assert", "predicate": "ledger-conservation", "initial": true}
        ]}"#,
    )
    .unwrap();
    let report = run_scenario(&sys, &sc).unwrap();
    assert!(report.passed(), "{:?}", report.failure);
    assert_eq!(report.metrics.provisioned, 1);
    assert_eq!(report.metrics.requests, 1);
}

#[test]
fn scenario_with_commit_fault_expects_failed() {
    let sys = refnet();
    let sc = ScenarioFile::parse(
        r#"{"steps": [
            {"id": "f", "action": "inject_fault", "kind": "commit-fail", "target": "mw"},
            {"id": "p", "action": "provision", "from": "ip/R1:ge1", "to": "mw/M3:eth0", "mbps": 100, "as": "svc"},
            {"id": "a", "action": "assert", "predicate": "state-equals", "service": "svc", "state": "FAILED"},
            {"id": "c", "action": "assert", "predicate": "ledger-conservation", "initial": true}
        ]}"#,
    )
    .unwrap();
    let report = run_scenario(&sys, &sc).unwrap();
    assert!(report.passed(), "{:?}", report.failure);
    assert_eq!((report.metrics.failed, report.metrics.rollbacks), (1, 1));
}

#[test]
fn empty_scenario_has_zero_metrics() {
    let sys = refnet();
    let report = run_scenario(&sys, &ScenarioFile::default()).unwrap();
    assert!(report.passed());
    assert_eq!(report.metrics.requests + report.metrics.provisioned + report.metrics.blocked, 0);
    assert_eq!(report.metrics.blocking_ratio, 0.0);
}

#[test]
fn failed_assertion_stops_with_a_dump() {
    let sys = refnet();
    let sc = ScenarioFile::parse(
        r#"{"steps": [
            {"id": "bad", "action": "assert", "predicate": "capacity-equals", "link": "mw/M1-M2", "mbps": 1},
            {"id": "never", "action": "sleep", "ticks": 1}
        ]}"#,
    )
    .unwrap();
    let report = run_scenario(&sys, &sc).unwrap();
    assert_eq!(report.failed_step.as_deref(), Some("bad"));
    assert_eq!(report.outcomes.len(), 1);
    assert!(report.state_dump.is_some());
    assert_eq!(ifusion_core::Error::from(report.error().unwrap()).code(), ErrorCode::StepFailed);
}

#[test]
fn duplicate_step_ids_are_rejected() {
    let err = ScenarioFile::parse(
        r#"{"steps": [{"id": "x", "action": "sleep", "ticks": 1}, {"id": "x", "action": "sleep", "ticks": 2}]}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("duplicate"));
}

#[test]
fn unknown_predicate_is_rejected() {
    assert!(ScenarioFile::parse(r#"{"steps": [{"id": "x", "action": "assert", "predicate": "vibes"}]}"#).is_err());
}

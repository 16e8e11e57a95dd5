// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use ifusion_core::model::{id, LayerTag, ServiceIntent, ServiceState};
use ifusion_core::sdtn::AbstractionLevel;
use ifusion_core::system::{FaultKind, FaultSpec};
use ifusion_core::topofile::{parse_topology, LoadError, REFNET};
use ifusion_core::{ErrorCode, System};

fn refnet() -> Arc<System> {
    System::from_json(REFNET).expect("refnet boots")
}

fn intent(a: &str, z: &str, mbps: u64) -> ServiceIntent {
    ServiceIntent::new(id(a), id(z), mbps)
}

fn fault(kind: FaultKind, target: &str, value: Option<&str>) -> FaultSpec {
    FaultSpec {
        kind,
        target: target.into(),
        value: value.map(Into::into),
    }
}

#[test]
fn boots_thirteen_devices_in_three_domains() {
    let sys = refnet();
    assert_eq!(sys.summary().devices, 13);
    assert_eq!(sys.summary().domains.len(), 3);
    let (_, full) = sys.topology(AbstractionLevel::Full, None);
    assert_eq!(full.graph.nodes.len(), 13);
    assert!(full.stale.is_empty());
    let idls = full.graph.links.iter().filter(|l| l.id.domain() == "sdtn").count();
    assert_eq!(idls, 2);
    assert!(sys.audit().is_clean());
}

#[test]
fn aggregated_view_has_one_node_per_domain() {
    let sys = refnet();
    let (_, agg) = sys.topology(AbstractionLevel::AggregatedNode, None);
    assert_eq!(agg.graph.nodes.len(), 3);
    assert_eq!(agg.graph.links.len(), 2);
    // the ip--mw abstract link cannot exceed the radio bottleneck
    let l = agg.graph.link(&id("sdtn/ip--mw")).unwrap();
    assert_eq!(l.te.capacity_mbps, 403);
}

#[test]
fn offline_domain_is_flagged_stale() {
    let sys = refnet();
    sys.inject(&fault(FaultKind::DomainOffline, "mw", None)).unwrap();
    let (_, full) = sys.topology(AbstractionLevel::Full, None);
    assert_eq!(full.graph.nodes.len(), 13);
    let stale: Vec<_> = full.stale.iter().map(|i| i.render()).collect();
    assert_eq!(stale, ["mw/M1", "mw/M2", "mw/M3"]);
}

#[test]
fn e2e_plan_crosses_ip_then_mw() {
    let sys = refnet();
    let plan = sys.sdtn().compute_e2e(&intent("ip/R1:ge1", "mw/M3:eth0", 100)).unwrap();
    let chain: Vec<_> = plan
        .segments
        .iter()
        .map(|s| (s.domain.as_str(), s.entry.node().render(), s.exit.node().render()))
        .collect();
    assert_eq!(
        chain,
        [("ip", "ip/R1".to_string(), "ip/R4".to_string()), ("mw", "mw/M1".to_string(), "mw/M3".to_string())]
    );
    assert_eq!(plan.inter_domain_links, [id("sdtn/R4-M1")]);
}

#[test]
fn single_domain_intent_is_one_segment() {
    let sys = refnet();
    let plan = sys.sdtn().compute_e2e(&intent("ip/R1:ge1", "ip/R4:ge1", 100)).unwrap();
    assert_eq!(plan.segments.len(), 1);
    assert!(plan.inter_domain_links.is_empty());
}

#[test]
fn radio_bottleneck_makes_mw_infeasible() {
    let sys = refnet();
    let err = sys.provision(&intent("ip/R1:ge1", "mw/M3:eth0", 500)).unwrap_err();
    assert_eq!(err.code(), ErrorCode::DomainInfeasible);
    assert!(err.to_string().contains("mw"), "{err}");
    assert!(err.to_string().contains("capacity"), "{err}");
    assert!(sys.services().1.is_empty());
}

#[test]
fn provision_then_teardown_restores_ledgers() {
    let sys = refnet();
    let initial = sys.snapshot();
    let svc = sys.provision(&intent("ip/R1:ge1", "mw/M3:eth0", 100)).unwrap();
    assert_eq!(svc.state, ServiceState::Active);
    assert_eq!(sys.ip().lsps().len(), 1);
    assert_eq!(sys.mw().allocations().len(), 1);
    assert!(sys.audit().is_clean());
    let path: Vec<_> = sys.sdtn().service_path(&svc.id).unwrap().iter().map(|l| l.render()).collect();
    assert_eq!(path, ["ip/R1-R2", "ip/R2-R3", "ip/R3-R4", "sdtn/R4-M1", "mw/M1-M2", "mw/M2-M3"]);
    let done = sys.teardown(&svc.id).unwrap();
    assert_eq!(done.state, ServiceState::Deleted);
    assert_eq!(sys.ledgers(), initial["ledgers"]);
    assert_eq!(sys.snapshot()["devices"], initial["devices"]);
}

#[test]
fn mw_commit_fault_rolls_back_everything() {
    let sys = refnet();
    let before = sys.snapshot_bytes();
    sys.inject(&fault(FaultKind::CommitFail, "mw", None)).unwrap();
    let err = sys.provision(&intent("ip/R1:ge1", "mw/M3:eth0", 100)).unwrap_err();
    assert_eq!(err.code(), ErrorCode::CommitFailed);
    let svc = &sys.services().1[0];
    assert_eq!(svc.state, ServiceState::Failed);
    assert_eq!(sys.snapshot_bytes(), before);
}

#[test]
fn optical_endpoint_uses_an_odu() {
    let sys = refnet();
    let initial = sys.ledgers();
    let svc = sys.provision(&intent("ip/R1:ge1", "optical/O1:ad1", 1000)).unwrap();
    assert_eq!(svc.segments.len(), 2);
    assert_eq!(sys.optical().odus().len(), 1);
    sys.teardown(&svc.id).unwrap();
    assert!(sys.optical().ochs().iter().all(|o| !o.state.holds_resources()));
    assert_eq!(sys.ledgers(), initial);
    assert!(sys.audit().is_clean());
}

#[test]
fn unknown_technology_is_a_parse_error() {
    let text = REFNET.replacen("\"technology\": \"IP\"", "\"technology\": \"sonet\"", 1);
    assert!(matches!(parse_topology(&text), Err(LoadError::Parse { .. })));
}

#[test]
fn empty_domain_list_boots_empty() {
    let sys = System::from_json(r#"{"domains": []}"#).unwrap();
    let (_, t) = sys.topology(AbstractionLevel::Full, None);
    assert!(t.graph.nodes.is_empty());
    assert!(t.graph.links.is_empty());
}

#[test]
fn dangling_endpoint_fails_validation() {
    let text = REFNET.replacen("ip/R1:ge2", "ip/R1:ge9", 1);
    match System::from_json(&text) {
        Err(LoadError::Validation(report)) => assert!(report.iter().any(|r| r.contains("ip/R1:ge9"))),
        other => panic!("expected validation failure, got {:?}", other.err()),
    }
}

#[test]
fn ip_links_appear_on_all_layers() {
    let sys = refnet();
    let topo = sys.ip().topology();
    for layer in [LayerTag::EthL2, LayerTag::IpL3, LayerTag::Mpls] {
        assert_eq!(topo.layer(layer).unwrap().links.len(), 4, "{layer:?}");
    }
}

#[test]
fn failed_release_restores_the_released_segments() {
    let sys = refnet();
    let svc = sys.provision(&intent("ip/R1:ge1", "mw/M3:eth0", 100)).unwrap();
    // mw is released first, then the head-end refuses to drop the LSP
    sys.inject(&fault(FaultKind::CommitFail, "ip/R1", None)).unwrap();
    let err = sys.teardown(&svc.id).unwrap_err();
    assert_eq!(err.code(), ErrorCode::TeardownIncomplete);
    let after = sys.service(&svc.id).1.unwrap();
    assert_eq!(after.state, ServiceState::Active);
    assert!(after.segments.iter().all(|s| s.state == ServiceState::Active));
    assert_eq!(sys.mw().allocations().iter().filter(|a| a.state == ServiceState::Active).count(), 1);
    assert!(sys.audit().is_clean(), "{:?}", sys.audit());

    let initial = refnet().ledgers();
    sys.teardown(&svc.id).unwrap();
    assert_eq!(sys.ledgers(), initial);
}

// SPDX-License-Identifier: Apache-2.0

mod oracle;

use ifusion_core::scenario::ScenarioFile;
use ifusion_core::topofile::{parse_topology, REFNET};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::{json, Value};

const TOPOLOGY_SCHEMA: &str = include_str!("../../../schemas/topology.schema.json");
const SCENARIO_SCHEMA: &str = include_str!("../../../schemas/scenario.schema.json");

fn validator(text: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str(text).unwrap()).unwrap()
}

fn errors(v: &jsonschema::Validator, doc: &Value) -> Vec<String> {
    v.iter_errors(doc).map(|e| e.to_string()).collect()
}

#[test]
fn shipped_topologies_match_the_schema() {
    let v = validator(TOPOLOGY_SCHEMA);
    let refnet: Value = serde_json::from_str(REFNET).unwrap();
    assert_eq!(errors(&v, &refnet), Vec::<String>::new());
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let text = oracle::mesh_topology_json(&oracle::random_mesh(&mut rng, 6, 4, 0.0));
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(errors(&v, &doc), Vec::<String>::new());
        parse_topology(&text).unwrap();
    }
}

#[test]
fn schema_and_parser_reject_the_same_topology_mistakes() {
    let v = validator(TOPOLOGY_SCHEMA);
    let bad = [
        json!({"domains": [{"name": "x", "technology": "SONET"}]}),
        json!({"domains": [], "devices": [{"id": "ip/R1", "technology": "IP"}]}),
        json!({"domains": [], "colour": "red"}),
        json!({"devices": []}),
    ];
    for doc in bad {
        assert!(!v.is_valid(&doc), "schema accepted {doc}");
        assert!(parse_topology(&doc.to_string()).is_err(), "parser accepted {doc}");
    }
}

#[test]
fn scenarios_match_the_schema() {
    let v = validator(SCENARIO_SCHEMA);
    let good = json!({"steps": [
        {"id": "p", "action": "provision", "from": "ip/R1:ge1", "to": "mw/M3:eth0", "mbps": 100, "as": "s"},
        {"id": "f", "action": "inject_fault", "kind": "modulation", "target": "mw/M1-M2", "value": "QPSK"},
        {"id": "w", "action": "sleep", "ticks": 2},
        {"id": "a1", "action": "assert", "predicate": "state-equals", "service": "s", "state": "ACTIVE"},
        {"id": "a2", "action": "assert", "predicate": "capacity-equals", "link": "mw/M1-M2", "mbps": 100},
        {"id": "a3", "action": "assert", "predicate": "ledger-conservation"},
        {"id": "t", "action": "teardown", "service": "s"}
    ]});
    assert_eq!(errors(&v, &good), Vec::<String>::new());
    ScenarioFile::parse(&good.to_string()).unwrap();

    let bad = [
        json!({"steps": [{"id": "x", "action": "dance"}]}),
        json!({"steps": [{"id": "x", "action": "assert", "predicate": "vibes"}]}),
        json!({"steps": [{"id": "x", "action": "inject_fault", "kind": "meteor", "target": "ip"}]}),
        json!({"steps": [{"id": "x", "action": "provision", "from": "ip/R1:ge1", "mbps": 1}]}),
    ];
    for doc in bad {
        assert!(!v.is_valid(&doc), "schema accepted {doc}");
        assert!(ScenarioFile::parse(&doc.to_string()).is_err(), "parser accepted {doc}");
    }
}

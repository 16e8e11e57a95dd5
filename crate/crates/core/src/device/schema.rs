// SPDX-License-Identifier: Apache-2.0

//! Per-technology configuration schemas, loaded from the JSON files under
//! `schemas/`.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::Deserialize;

use super::config::{ConfigTree, Edit, EditOp, LeafValue};
use crate::model::Technology;
use crate::mw::Modulation;

const IP_SCHEMA: &str = include_str!("../../../../schemas/ip.json");
const OPTICAL_SCHEMA: &str = include_str!("../../../../schemas/optical.json");
const MW_SCHEMA: &str = include_str!("../../../../schemas/mw.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Integer,
    String,
    Boolean,
    Enum,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSpec {
    pub path: String,
    #[serde(rename = "type")]
    pub kind: LeafKind,
    #[serde(default)]
    pub values: Vec<String>,
    #[serde(default)]
    pub allowed: Vec<i64>,
    pub min: Option<i64>,
    pub max: Option<i64>,
    #[serde(default)]
    pub mandatory: bool,
}

impl LeafSpec {
    fn matches(&self, path: &str) -> bool {
        let mut pat = self.path.split('/');
        let mut segs = path.split('/');
        loop {
            match (pat.next(), segs.next()) {
                (None, None) => return true,
                (Some("*"), Some(s)) if !s.is_empty() => {}
                (Some(p), Some(s)) if p == s => {}
                _ => return false,
            }
        }
    }

    /// Checks a value against the leaf type and its value constraints.
    pub fn check(&self, value: &LeafValue) -> Result<(), String> {
        match (self.kind, value) {
            (LeafKind::Boolean, LeafValue::Bool(_)) => Ok(()),
            (LeafKind::String, LeafValue::Str(_)) => Ok(()),
            (LeafKind::Enum, LeafValue::Str(s)) => {
                if self.values.iter().any(|v| v == s) {
                    Ok(())
                } else {
                    Err(format!("{s:?} not one of {:?}", self.values))
                }
            }
            (LeafKind::Integer, LeafValue::Int(v)) => {
                if !self.allowed.is_empty() && !self.allowed.contains(v) {
                    return Err(format!("{v} not in {:?}", self.allowed));
                }
                if self.min.is_some_and(|m| *v < m) || self.max.is_some_and(|m| *v > m) {
                    return Err(format!("{v} outside [{:?}, {:?}]", self.min, self.max));
                }
                Ok(())
            }
            (kind, v) => Err(format!("expected {kind:?}, got {v}")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortDefault {
    pub port_prefix: String,
    pub branch: String,
    pub leaves: BTreeMap<String, LeafValue>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub technology: Technology,
    pub leaves: Vec<LeafSpec>,
    #[serde(default)]
    pub port_defaults: Vec<PortDefault>,
}

/// Why an edit was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub path: String,
    pub reason: String,
}

impl Schema {
    pub fn for_technology(tech: Technology) -> Arc<Schema> {
        static SCHEMAS: OnceLock<[Arc<Schema>; 3]> = OnceLock::new();
        let all = SCHEMAS.get_or_init(|| {
            [IP_SCHEMA, OPTICAL_SCHEMA, MW_SCHEMA]
                .map(|s| Arc::new(serde_json::from_str::<Schema>(s).expect("shipped schema parses")))
        });
        all[match tech {
            Technology::Ip => 0,
            Technology::Optical => 1,
            Technology::Mw => 2,
        }]
        .clone()
    }

    pub fn leaf(&self, path: &str) -> Option<&LeafSpec> {
        self.leaves.iter().find(|l| l.matches(path))
    }

    pub fn check_edit(&self, edit: &Edit) -> Result<(), SchemaViolation> {
        let violation = |reason: String| SchemaViolation {
            path: edit.path.clone(),
            reason,
        };
        let spec = self
            .leaf(&edit.path)
            .ok_or_else(|| violation("unknown path".into()))?;
        match edit.op {
            EditOp::Set => {
                let v = edit
                    .value
                    .as_ref()
                    .ok_or_else(|| violation("SET without value".into()))?;
                spec.check(v).map_err(violation)
            }
            EditOp::Delete if spec.mandatory => Err(violation("mandatory leaf cannot be deleted".into())),
            EditOp::Delete => Ok(()),
        }
    }

    /// Factory configuration for a device with the given port names.
    pub fn factory_tree<'a>(&self, ports: impl IntoIterator<Item = &'a str>) -> ConfigTree {
        let mut tree = ConfigTree::new();
        for port in ports {
            for d in self.port_defaults.iter().filter(|d| port.starts_with(&d.port_prefix)) {
                for (leaf, v) in &d.leaves {
                    tree.set(format!("{}/{port}/{leaf}", d.branch), v.clone());
                }
            }
        }
        tree
    }

    /// Whole-tree validation run before a commit: per-leaf typing plus the
    /// technology's cross-leaf constraints.
    pub fn validate_tree(&self, tree: &ConfigTree) -> Vec<String> {
        let mut report = Vec::new();
        for (path, v) in tree.iter() {
            match self.leaf(path) {
                Some(spec) => {
                    if let Err(e) = spec.check(v) {
                        report.push(format!("{path}: {e}"));
                    }
                }
                None => report.push(format!("{path}: unknown path")),
            }
        }
        if self.technology == Technology::Mw {
            for radio in tree.children("/air-interface") {
                let get = |leaf: &str| tree.get(&format!("/air-interface/{radio}/{leaf}"));
                for spec in self.leaves.iter().filter(|l| l.mandatory) {
                    let leaf = spec.path.rsplit('/').next().unwrap_or_default();
                    if get(leaf).is_none() {
                        report.push(format!("/air-interface/{radio}/{leaf}: missing mandatory leaf"));
                    }
                }
                let order = |leaf: &str| {
                    get(leaf)
                        .and_then(LeafValue::as_str)
                        .and_then(|s| s.parse::<Modulation>().ok())
                };
                if let (Some(lo), Some(hi)) = (order("modulation_min"), order("modulation_max")) {
                    if lo > hi {
                        report.push(format!("/air-interface/{radio}: modulation_min above modulation_max"));
                    }
                    if get("adaptive").and_then(LeafValue::as_bool) == Some(false) && lo != hi {
                        report.push(format!(
                            "/air-interface/{radio}: fixed modulation requires modulation_min == modulation_max"
                        ));
                    }
                }
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_schemas_load() {
        for t in [Technology::Ip, Technology::Optical, Technology::Mw] {
            assert_eq!(Schema::for_technology(t).technology, t);
        }
    }

    #[test]
    fn wildcard_matching() {
        let s = Schema::for_technology(Technology::Ip);
        assert!(s.leaf("/interfaces/ge0/vlan").is_some());
        assert!(s.leaf("/interfaces//vlan").is_none());
        assert!(s.leaf("/interfaces/ge0/vlan/x").is_none());
        assert!(s.leaf("/vrf/vpn1/interfaces/ge1/vlan").is_some());
        assert!(s.leaf("/bogus/path").is_none());
    }

    #[test]
    fn typed_checks() {
        let s = Schema::for_technology(Technology::Ip);
        assert!(s.check_edit(&Edit::set("/interfaces/ge0/vlan", 100)).is_ok());
        assert!(s.check_edit(&Edit::set("/interfaces/ge0/vlan", "abc")).is_err());
        assert!(s.check_edit(&Edit::set("/interfaces/ge0/vlan", 5000)).is_err());
        let mw = Schema::for_technology(Technology::Mw);
        assert!(mw.check_edit(&Edit::set("/air-interface/radio0/channel_bandwidth_mhz", 56)).is_ok());
        assert!(mw.check_edit(&Edit::set("/air-interface/radio0/channel_bandwidth_mhz", 13)).is_err());
        assert!(mw.check_edit(&Edit::delete("/air-interface/radio0/adaptive")).is_err());
        assert!(mw.check_edit(&Edit::set("/air-interface/radio0/modulation_max", "QAM512")).is_err());
    }

    #[test]
    fn mw_cross_leaf_rules() {
        let mw = Schema::for_technology(Technology::Mw);
        let mut t = mw.factory_tree(["radio0", "eth0"]);
        assert_eq!(t.len(), 6);
        assert!(mw.validate_tree(&t).is_empty());
        t.set("/air-interface/radio0/modulation_max", "QAM256");
        assert_eq!(mw.validate_tree(&t).len(), 1, "non-adaptive with min != max");
        t.set("/air-interface/radio0/adaptive", true);
        assert!(mw.validate_tree(&t).is_empty());
        t.set("/air-interface/radio0/modulation_min", "QAM1024");
        assert_eq!(mw.validate_tree(&t).len(), 1);
    }
}

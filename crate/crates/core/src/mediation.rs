// SPDX-License-Identifier: Apache-2.0

//! Mediation between the standard datastore model and legacy devices.
//!
//! Legacy radios have no candidate store, so the mediator keeps a shadow
//! candidate per session and only talks to the device on commit, where the
//! diff is turned into the minimal `SET` sequence. A rejected command is
//! compensated by re-setting every already-applied parameter to its prior
//! value. Successful commits emit a synthetic CONFIG_COMMITTED so that the
//! controller sees the same event stream as for a native device.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::device::config::{ConfigTree, Edit, LeafValue};
use crate::device::legacy::{parse_show_all, LegacyErrorCode};
use crate::device::schema::Schema;
use crate::device::{CommitId, DeviceError, DevicePlane, NotificationKind, SessionId};
use crate::model::{Identifier, Technology};

const MW_LEGACY_RULES: &str = include_str!("../../../mediation/mw-legacy.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MediationError {
    #[error("no mapping rule for {0}")]
    UnmappedPath(String),
    #[error("legacy parameter {0} has no mapping rule")]
    UnmappedParam(String),
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("validation failed: {0:?}")]
    ValidationFailed(Vec<String>),
    #[error("legacy device rejected {cmd:?} with {code}")]
    LegacyRejected { cmd: String, code: String },
    #[error("compensation failed at {cmd:?}; device left inconsistent")]
    CompensationFailed { cmd: String },
    #[error("a mediated session is already open on {0}")]
    LockedByOther(Identifier),
    #[error("rule set invalid: {0}")]
    InvalidRules(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValueMap {
    /// Decimal rendering of an integer leaf.
    Integer,
    /// Explicit bijection between standard values and legacy tokens.
    Table { pairs: Vec<(LeafValue, String)> },
}

impl ValueMap {
    fn to_legacy(&self, v: &LeafValue) -> Option<String> {
        match self {
            ValueMap::Integer => v.as_int().map(|i| i.to_string()),
            ValueMap::Table { pairs } => pairs.iter().find(|(s, _)| s == v).map(|(_, l)| l.clone()),
        }
    }

    fn to_standard(&self, token: &str) -> Option<LeafValue> {
        match self {
            ValueMap::Integer => token
                .parse::<i64>()
                .ok()
                .filter(|i| i.to_string() == token)
                .map(LeafValue::Int),
            ValueMap::Table { pairs } => pairs.iter().find(|(_, l)| l == token).map(|(s, _)| s.clone()),
        }
    }

    fn is_bijective(&self) -> bool {
        match self {
            ValueMap::Integer => true,
            ValueMap::Table { pairs } => {
                let left: BTreeSet<_> = pairs.iter().map(|(s, _)| s).collect();
                let right: BTreeSet<_> = pairs.iter().map(|(_, l)| l).collect();
                left.len() == pairs.len() && right.len() == pairs.len()
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct MappingRule {
    pub standard_path: String,
    pub legacy_param: String,
    pub value_map: ValueMap,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RuleSet {
    pub profile: String,
    pub technology: Technology,
    /// The single standard interface a legacy device exposes.
    pub interface: String,
    pub rules: Vec<MappingRule>,
}

impl RuleSet {
    pub fn mw_legacy() -> Arc<RuleSet> {
        static RULES: OnceLock<Arc<RuleSet>> = OnceLock::new();
        RULES
            .get_or_init(|| {
                let rules: RuleSet = serde_json::from_str(MW_LEGACY_RULES).expect("shipped rule set parses");
                rules.check().expect("shipped rule set is consistent");
                Arc::new(rules)
            })
            .clone()
    }

    /// Bijective value maps, unique paths and params, and total coverage of
    /// the technology schema for the exposed interface.
    pub fn check(&self) -> Result<(), MediationError> {
        let mut paths = BTreeSet::new();
        let mut params = BTreeSet::new();
        for r in &self.rules {
            if !paths.insert(&r.standard_path) || !params.insert(&r.legacy_param) {
                return Err(MediationError::InvalidRules(format!("duplicate rule for {}", r.standard_path)));
            }
            if !r.value_map.is_bijective() {
                return Err(MediationError::InvalidRules(format!("{} value map not bijective", r.standard_path)));
            }
        }
        let schema = Schema::for_technology(self.technology);
        for leaf in &schema.leaves {
            let concrete = leaf.path.replacen('*', &self.interface, 1);
            if !paths.contains(&concrete) {
                return Err(MediationError::InvalidRules(format!("{concrete} not covered")));
            }
        }
        Ok(())
    }

    fn by_path(&self, path: &str) -> Option<&MappingRule> {
        self.rules.iter().find(|r| r.standard_path == path)
    }

    fn by_param(&self, param: &str) -> Option<&MappingRule> {
        self.rules.iter().find(|r| r.legacy_param == param)
    }
}

#[derive(Debug, Clone)]
pub struct MediatedSession {
    pub device: Identifier,
    pub session: SessionId,
    pub shadow_candidate: ConfigTree,
    pub applied_log: Vec<String>,
}

/// Stateless across devices; holds at most one session per legacy device.
pub struct Mediator {
    rules: Arc<RuleSet>,
    schema: Arc<Schema>,
    plane: Arc<DevicePlane>,
    sessions: Mutex<BTreeMap<Identifier, MediatedSession>>,
    next_session: Mutex<u64>,
}

impl Mediator {
    pub fn new(plane: Arc<DevicePlane>, rules: Arc<RuleSet>) -> Self {
        Self {
            schema: Schema::for_technology(rules.technology),
            rules,
            plane,
            sessions: Mutex::new(BTreeMap::new()),
            next_session: Mutex::new(1u64 << 32),
        }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn open(&self, dev: &Identifier) -> Result<SessionId, MediationError> {
        let current = self.mediate_read(dev)?;
        let mut sessions = self.sessions.lock();
        if sessions.contains_key(dev) {
            return Err(MediationError::LockedByOther(dev.clone()));
        }
        let mut n = self.next_session.lock();
        *n += 1;
        let session = SessionId(*n);
        sessions.insert(
            dev.clone(),
            MediatedSession {
                device: dev.clone(),
                session,
                shadow_candidate: current,
                applied_log: Vec::new(),
            },
        );
        Ok(session)
    }

    fn with_session<T>(
        &self,
        dev: &Identifier,
        session: SessionId,
        f: impl FnOnce(&mut MediatedSession) -> Result<T, MediationError>,
    ) -> Result<T, MediationError> {
        let mut sessions = self.sessions.lock();
        match sessions.get_mut(dev) {
            Some(s) if s.session == session => f(s),
            _ => Err(MediationError::LockedByOther(dev.clone())),
        }
    }

    pub fn session(&self, dev: &Identifier) -> Option<MediatedSession> {
        self.sessions.lock().get(dev).cloned()
    }

    /// Stages a batch in the shadow candidate. Nothing reaches the device.
    pub fn mediate_edit(&self, dev: &Identifier, session: SessionId, edits: &[Edit]) -> Result<(), MediationError> {
        self.with_session(dev, session, |s| {
            if !self.plane.is_reachable(dev)? {
                return Err(DeviceError::Unreachable(dev.clone()).into());
            }
            if self.plane.take_edit_fault(dev)? {
                return Err(DeviceError::InjectedFault("edit rejected".into()).into());
            }
            for e in edits {
                if self.rules.by_path(&e.path).is_none() {
                    return Err(MediationError::UnmappedPath(e.path.clone()));
                }
                self.schema
                    .check_edit(e)
                    .map_err(|v| MediationError::SchemaViolation {
                        path: v.path,
                        reason: v.reason,
                    })?;
            }
            s.shadow_candidate.apply(edits);
            Ok(())
        })
    }

    pub fn discard(&self, dev: &Identifier, session: SessionId) -> Result<(), MediationError> {
        let current = self.mediate_read(dev)?;
        self.with_session(dev, session, |s| {
            s.shadow_candidate = current;
            Ok(())
        })
    }

    pub fn close(&self, dev: &Identifier, session: SessionId) -> Result<(), MediationError> {
        let mut sessions = self.sessions.lock();
        match sessions.get(dev) {
            Some(s) if s.session == session => {
                sessions.remove(dev);
                Ok(())
            }
            _ => Err(MediationError::LockedByOther(dev.clone())),
        }
    }

    /// The legacy commands realising `from -> to`: deletes first, then sets,
    /// each group in path order.
    pub fn commands_for(&self, from: &ConfigTree, to: &ConfigTree) -> Result<Vec<(String, String)>, MediationError> {
        let diff = from.diff(to);
        let mut out = Vec::new();
        // mandatory leaves cannot be deleted, so a valid shadow never yields deletes
        if let Some(d) = diff.iter().find(|c| c.new.is_none()) {
            return Err(MediationError::SchemaViolation {
                path: d.path.clone(),
                reason: "legacy parameters cannot be removed".into(),
            });
        }
        for c in diff {
            let rule = self
                .rules
                .by_path(&c.path)
                .ok_or_else(|| MediationError::UnmappedPath(c.path.clone()))?;
            let value = c.new.as_ref().expect("deletes rejected above");
            let token = rule.value_map.to_legacy(value).ok_or_else(|| MediationError::SchemaViolation {
                path: c.path.clone(),
                reason: format!("value {value} has no legacy token"),
            })?;
            let prior = match &c.old {
                Some(v) => rule.value_map.to_legacy(v).unwrap_or_default(),
                None => String::new(),
            };
            out.push((format!("SET {} {}", rule.legacy_param, token), prior));
        }
        Ok(out)
    }

    /// Pushes the shadow candidate to the device.
    pub fn mediate_commit(&self, dev: &Identifier, session: SessionId) -> Result<CommitId, MediationError> {
        let shadow = self.with_session(dev, session, |s| Ok(s.shadow_candidate.clone()))?;
        // same order as a native datastore: an armed fault fires first
        if self.plane.take_commit_fault(dev)? {
            return Err(MediationError::ValidationFailed(vec!["injected commit failure".into()]));
        }
        let report = self.schema.validate_tree(&shadow);
        if !report.is_empty() {
            return Err(MediationError::ValidationFailed(report));
        }
        let current = self.mediate_read(dev)?;
        let commands = self.commands_for(&current, &shadow)?;
        let mut applied: Vec<(String, String)> = Vec::new();
        let mut log = Vec::new();
        for (cmd, prior) in &commands {
            let reply = self.plane.legacy_execute(dev, cmd)?;
            log.push(cmd.clone());
            if reply == "OK" {
                applied.push((cmd.clone(), prior.clone()));
                continue;
            }
            let code = reply
                .strip_prefix("ERR ")
                .and_then(LegacyErrorCode::parse)
                .map(|c| c.as_str().to_string())
                .unwrap_or(reply.clone());
            for (done, prior) in applied.iter().rev() {
                let param = done.split(' ').nth(1).unwrap_or_default();
                let undo = format!("SET {param} {prior}");
                let r = self.plane.legacy_execute(dev, &undo)?;
                log.push(undo.clone());
                if r != "OK" {
                    self.append_log(dev, session, log);
                    return Err(MediationError::CompensationFailed { cmd: undo });
                }
            }
            self.append_log(dev, session, log);
            return Err(MediationError::LegacyRejected { cmd: cmd.clone(), code });
        }
        self.append_log(dev, session, log);
        let commit_id = self.plane.allocate_commit_id(dev)?;
        let diff = current.diff(&shadow);
        self.plane.emit(
            dev,
            NotificationKind::ConfigCommitted,
            json!({ "commit_id": commit_id.0, "diff": diff }),
        )?;
        Ok(commit_id)
    }

    fn append_log(&self, dev: &Identifier, session: SessionId, mut log: Vec<String>) {
        let _ = self.with_session(dev, session, |s| {
            s.applied_log.append(&mut log);
            Ok(())
        });
    }

    /// Reads the device through `SHOW ALL` and maps it into the standard model.
    pub fn mediate_read(&self, dev: &Identifier) -> Result<ConfigTree, MediationError> {
        let reply = self.plane.legacy_execute(dev, "SHOW ALL")?;
        let mut tree = ConfigTree::new();
        for (param, token) in parse_show_all(&reply) {
            let rule = self
                .rules
                .by_param(&param)
                .ok_or_else(|| MediationError::UnmappedParam(param.clone()))?;
            let value = rule
                .value_map
                .to_standard(&token)
                .ok_or_else(|| MediationError::UnmappedParam(format!("{param}={token}")))?;
            tree.set(rule.standard_path.clone(), value);
        }
        Ok(tree)
    }

    /// Candidate as the controller would see it through a datastore query.
    pub fn candidate(&self, dev: &Identifier) -> Result<ConfigTree, MediationError> {
        if let Some(s) = self.sessions.lock().get(dev) {
            return Ok(s.shadow_candidate.clone());
        }
        self.mediate_read(dev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceDescriptor, DeviceFault, VendorProfile};
    use crate::model::id;

    fn setup() -> (Arc<DevicePlane>, Mediator, Identifier) {
        let mut p = DevicePlane::new();
        let m3 = id("mw/M3");
        p.add_device(DeviceDescriptor::new(m3.clone(), Technology::Mw, VendorProfile::Legacy, &["radio0"]))
            .unwrap();
        let p = Arc::new(p);
        let m = Mediator::new(p.clone(), RuleSet::mw_legacy());
        (p, m, m3)
    }

    const BW: &str = "/air-interface/radio0/channel_bandwidth_mhz";

    #[test]
    fn shipped_rules_cover_schema() {
        RuleSet::mw_legacy().check().unwrap();
    }

    #[test]
    fn factory_read_matches_standard_factory_tree() {
        let (_, m, m3) = setup();
        let std_factory = Schema::for_technology(Technology::Mw).factory_tree(["radio0"]);
        assert_eq!(m.mediate_read(&m3).unwrap(), std_factory);
    }

    #[test]
    fn edits_are_staged_only() {
        let (p, m, m3) = setup();
        let s = m.open(&m3).unwrap();
        m.mediate_edit(&m3, s, &[Edit::set(BW, 56)]).unwrap();
        assert_eq!(p.legacy_execute(&m3, "GET RF-BW").unwrap(), "28");
        assert_eq!(m.candidate(&m3).unwrap().get(BW), Some(&LeafValue::Int(56)));
    }

    #[test]
    fn unmapped_path_rejects_whole_batch() {
        let (_, m, m3) = setup();
        let s = m.open(&m3).unwrap();
        let before = m.candidate(&m3).unwrap();
        let err = m
            .mediate_edit(&m3, s, &[Edit::set(BW, 56), Edit::set("/air-interface/radio0/xpic", true)])
            .unwrap_err();
        assert_eq!(err, MediationError::UnmappedPath("/air-interface/radio0/xpic".into()));
        assert_eq!(m.candidate(&m3).unwrap(), before);
    }

    #[test]
    fn commit_emits_minimal_commands() {
        let (p, m, m3) = setup();
        let s = m.open(&m3).unwrap();
        m.mediate_edit(&m3, s, &[Edit::set(BW, 56)]).unwrap();
        m.mediate_commit(&m3, s).unwrap();
        assert_eq!(m.session(&m3).unwrap().applied_log, vec!["SET RF-BW 56"]);
        assert_eq!(p.legacy_execute(&m3, "GET RF-BW").unwrap(), "56");
        let log = p.event_log(&m3).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].kind, NotificationKind::ConfigCommitted);
    }

    #[test]
    fn empty_commit_sends_nothing() {
        let (_, m, m3) = setup();
        let s = m.open(&m3).unwrap();
        let c1 = m.mediate_commit(&m3, s).unwrap();
        let c2 = m.mediate_commit(&m3, s).unwrap();
        assert!(c2 > c1);
        assert!(m.session(&m3).unwrap().applied_log.is_empty());
    }

    #[test]
    fn rejected_command_is_compensated() {
        let (p, m, m3) = setup();
        let before = p.legacy_execute(&m3, "SHOW ALL").unwrap();
        let s = m.open(&m3).unwrap();
        m.mediate_edit(
            &m3,
            s,
            &[
                Edit::set("/air-interface/radio0/adaptive", true),
                Edit::set("/air-interface/radio0/modulation_max", "QAM256"),
            ],
        )
        .unwrap();
        p.inject(&m3, DeviceFault::LegacyRejectAfter(1)).unwrap();
        let err = m.mediate_commit(&m3, s).unwrap_err();
        assert_eq!(
            err,
            MediationError::LegacyRejected {
                cmd: "SET MOD-MAX QAM256".into(),
                code: "BAD_VALUE".into()
            }
        );
        assert_eq!(p.legacy_execute(&m3, "SHOW ALL").unwrap(), before);
        assert!(p.event_log(&m3).unwrap().is_empty());
    }

    #[test]
    fn read_reflects_out_of_band_changes() {
        let (p, m, m3) = setup();
        p.legacy_execute(&m3, "SET MOD-MAX QAM1024").unwrap();
        let t = m.mediate_read(&m3).unwrap();
        assert_eq!(
            t.get("/air-interface/radio0/modulation_max"),
            Some(&LeafValue::Str("QAM1024".into()))
        );
    }

    #[test]
    fn one_session_per_device() {
        let (_, m, m3) = setup();
        let s = m.open(&m3).unwrap();
        assert!(matches!(m.open(&m3), Err(MediationError::LockedByOther(_))));
        m.close(&m3, s).unwrap();
        m.open(&m3).unwrap();
    }
}

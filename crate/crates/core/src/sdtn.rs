// SPDX-License-Identifier: Apache-2.0

//! Hierarchical transport orchestrator. Stitches the IP, optical and MW
//! domain controllers: global topology assembly and abstraction, domain-level
//! route selection, two-phase end-to-end provisioning with rollback,
//! IP-over-optical augmentation and reaction to radio capacity changes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::Receiver;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ip::{Adjacency, IpController, IpError};
use crate::model::{Identifier, LayerTag, LinkRecord, Mbps, ModelError, NodeRecord, ServiceIntent, ServiceState, TeAttributes, Technology, TopologyGraph};
use crate::mw::{CapacityChange, MwController, MwError};
use crate::optical::{OduRate, OpticalController, OpticalError};
use crate::path::{NoPathReason, Route};

pub const SDTN_DOMAIN: &str = "sdtn";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterDomainLink {
    pub id: Identifier,
    pub a: Identifier,
    pub z: Identifier,
    pub layer: LayerTag,
    pub capacity_mbps: Mbps,
}

/// A router port cabled to a ROADM add/drop port, usable for IP-over-optical
/// augmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentPort {
    pub router_port: Identifier,
    pub roadm_port: Identifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AbstractionLevel {
    Full,
    AggregatedNode,
}

impl FromStr for AbstractionLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(AbstractionLevel::Full),
            "aggregated" | "aggregated_node" | "aggregated-node" => Ok(AbstractionLevel::AggregatedNode),
            _ => Err(format!("unknown abstraction level {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractTopology {
    pub level: AbstractionLevel,
    pub graph: TopologyGraph,
    /// Nodes whose state could not be refreshed.
    pub stale: BTreeSet<Identifier>,
    /// Abstract link -> the concrete inter-domain links it stands for.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub summarizes: BTreeMap<Identifier, Vec<Identifier>>,
}

/// The part of an e2e intent handed to one domain controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubIntent {
    pub domain: String,
    pub technology: Technology,
    pub entry: Identifier,
    pub exit: Identifier,
    pub requested_mbps: Mbps,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub excludes: BTreeSet<Identifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub segments: Vec<SubIntent>,
    pub inter_domain_links: Vec<Identifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub sub: SubIntent,
    /// LSP, ODU or MW allocation id in the owning domain.
    pub record: Option<Identifier>,
    pub state: ServiceState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LogAction {
    Augment,
    Reserve,
    Commit,
    Rollback,
    Activate,
    Fail,
    Release,
    Delete,
    Restart,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u32,
    pub action: LogAction,
    pub target: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct E2eService {
    pub id: Identifier,
    pub intent: ServiceIntent,
    pub state: ServiceState,
    pub segments: Vec<Segment>,
    pub inter_domain_links: Vec<Identifier>,
    pub transaction_log: Vec<LogEntry>,
}

impl E2eService {
    fn log(&mut self, action: LogAction, target: impl fmt::Display, result: Result<(), String>) {
        let seq = self.transaction_log.len() as u32 + 1;
        let (ok, detail) = match result {
            Ok(()) => (true, String::new()),
            Err(d) => (false, d),
        };
        self.transaction_log.push(LogEntry {
            seq,
            action,
            target: target.to_string(),
            ok,
            detail,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedLink {
    pub link: Identifier,
    pub odu: Identifier,
    pub head: Identifier,
    pub tail: Identifier,
    /// Created but did not make the demand routable; left for the operator.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedRequest {
    pub intent: ServiceIntent,
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RerouteOutcome {
    Rerouted,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerouteReport {
    pub change: CapacityChange,
    pub outcomes: Vec<(Identifier, RerouteOutcome)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdtnError {
    #[error("invalid intent: {0}")]
    InvalidIntent(String),
    #[error("no domain path")]
    NoDomainPath,
    #[error("domain {domain} infeasible: {reason}")]
    DomainInfeasible { domain: String, reason: String },
    #[error("{service}: reserve failed in {domain}: {reason}")]
    ReserveFailed {
        service: Identifier,
        domain: String,
        reason: String,
    },
    #[error("{service}: commit failed in {domain}: {reason}")]
    CommitFailed {
        service: Identifier,
        domain: String,
        reason: String,
    },
    #[error("{service}: rollback incomplete: {detail}")]
    RollbackIncomplete { service: Identifier, detail: String },
    #[error("{service}: teardown incomplete: {detail}")]
    TeardownIncomplete { service: Identifier, detail: String },
    #[error("optical layer blocked: {0}")]
    OpticalBlocked(String),
    #[error("still no path after adding {0}")]
    StillNoPath(Identifier),
    #[error("router {0} has no optical attachment")]
    NoAttachment(Identifier),
    #[error("unknown service {0}")]
    UnknownService(Identifier),
    #[error("{id} is {state}")]
    BadState { id: Identifier, state: ServiceState },
}

impl SdtnError {
    /// Errors raised before any resource was touched.
    pub fn is_blocking(&self) -> bool {
        matches!(
            self,
            SdtnError::NoDomainPath
                | SdtnError::DomainInfeasible { .. }
                | SdtnError::OpticalBlocked(_)
                | SdtnError::StillNoPath(_)
                | SdtnError::NoAttachment(_)
        )
    }
}

/// Transaction phase, used to arm one-shot failures per domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Reserve,
    Commit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdtnConfig {
    /// TE metric given to IP links created over optical circuits.
    pub augment_metric: u32,
    pub augment_enabled: bool,
}

impl Default for SdtnConfig {
    fn default() -> Self {
        Self {
            augment_metric: 100,
            augment_enabled: true,
        }
    }
}

enum PlanError {
    NoDomainPath,
    Infeasible { sub: Box<SubIntent>, reason: String, no_path: bool },
}

impl From<PlanError> for SdtnError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::NoDomainPath => SdtnError::NoDomainPath,
            PlanError::Infeasible { sub, reason, .. } => SdtnError::DomainInfeasible {
                domain: sub.domain,
                reason,
            },
        }
    }
}

#[derive(Default)]
struct SdtnState {
    idls: BTreeMap<Identifier, InterDomainLink>,
    idl_ledger: BTreeMap<Identifier, BTreeMap<Identifier, Mbps>>,
    attachments: Vec<AttachmentPort>,
    services: BTreeMap<u64, E2eService>,
    next_service: u64,
    augmented: Vec<AugmentedLink>,
    blocked: Vec<BlockedRequest>,
    offline: BTreeSet<String>,
    cache: BTreeMap<String, TopologyGraph>,
}

pub struct Sdtn {
    ip: Arc<IpController>,
    optical: Arc<OpticalController>,
    mw: Arc<MwController>,
    domains: BTreeMap<String, Technology>,
    config: SdtnConfig,
    notices: Mutex<Receiver<CapacityChange>>,
    armed: Mutex<BTreeSet<(Phase, String)>>,
    state: Mutex<SdtnState>,
}

fn no_path_reason(r: NoPathReason) -> String {
    match r {
        NoPathReason::PrunedAll => "capacity".into(),
        NoPathReason::Disconnected => "disconnected".into(),
    }
}

/// Smallest ODU container that fits `mbps`, restricted to `ladder`.
fn intent_error(e: ModelError) -> SdtnError {
    match e {
        ModelError::InvalidIntent(m) => SdtnError::InvalidIntent(m),
        other => SdtnError::InvalidIntent(other.to_string()),
    }
}

pub fn odu_for(mbps: Mbps, ladder: &[OduRate]) -> Option<OduRate> {
    ladder.iter().copied().find(|r| r.mbps() >= mbps)
}

impl Sdtn {
    pub fn new(
        ip: Arc<IpController>,
        optical: Arc<OpticalController>,
        mw: Arc<MwController>,
        domains: BTreeMap<String, Technology>,
        config: SdtnConfig,
    ) -> Self {
        let notices = Mutex::new(mw.subscribe());
        Self {
            ip,
            optical,
            mw,
            domains,
            config,
            notices,
            armed: Mutex::new(BTreeSet::new()),
            state: Mutex::new(SdtnState {
                next_service: 1,
                ..Default::default()
            }),
        }
    }

    pub fn onboard(&self, idls: Vec<InterDomainLink>, attachments: Vec<AttachmentPort>) {
        let mut st = self.state.lock();
        for l in idls {
            st.idl_ledger.insert(l.id.clone(), BTreeMap::new());
            st.idls.insert(l.id.clone(), l);
        }
        st.attachments = attachments;
    }

    pub fn domains(&self) -> &BTreeMap<String, Technology> {
        &self.domains
    }

    pub fn set_domain_online(&self, domain: &str, online: bool) -> bool {
        if !self.domains.contains_key(domain) {
            return false;
        }
        let mut st = self.state.lock();
        if online {
            st.offline.remove(domain);
        } else {
            st.offline.insert(domain.to_string());
        }
        true
    }

    pub fn inter_domain_links(&self) -> Vec<InterDomainLink> {
        self.state.lock().idls.values().cloned().collect()
    }

    pub fn augmented_links(&self) -> Vec<AugmentedLink> {
        self.state.lock().augmented.clone()
    }

    pub fn blocked_requests(&self) -> Vec<BlockedRequest> {
        self.state.lock().blocked.clone()
    }

    fn domain_graph(&self, tech: Technology) -> TopologyGraph {
        match tech {
            Technology::Ip => self.ip.topology().ip_l3,
            Technology::Optical => self.optical.topology(),
            Technology::Mw => self.mw.topology(),
        }
    }

    fn idl_unreserved(st: &SdtnState, id: &Identifier) -> Mbps {
        let used: Mbps = st.idl_ledger[id].values().sum();
        st.idls[id].capacity_mbps.saturating_sub(used)
    }

    fn bottleneck(&self, tech: Technology, node: &Identifier) -> Mbps {
        match tech {
            Technology::Ip => self.ip.widest_from(node),
            Technology::Optical => self.optical.widest_from(node),
            Technology::Mw => self.mw.widest_from(node),
        }
        .unwrap_or(0)
    }

    pub fn assemble_global_topology(&self, level: AbstractionLevel, only: Option<&str>) -> AbstractTopology {
        let mut st = self.state.lock();
        let mut graph = TopologyGraph::new();
        let mut stale = BTreeSet::new();
        for (name, tech) in &self.domains {
            if only.is_some_and(|d| d != name) {
                continue;
            }
            let g = if st.offline.contains(name) {
                let g = st.cache.get(name).cloned().unwrap_or_default();
                stale.extend(g.nodes.iter().map(|n| n.id.clone()));
                g
            } else {
                let g = self.domain_graph(*tech);
                st.cache.insert(name.clone(), g.clone());
                if *tech == Technology::Ip {
                    stale.extend(self.ip.stale_devices());
                }
                g
            };
            graph.merge(g);
        }
        if only.is_none() {
            for l in st.idls.values() {
                let mut te = TeAttributes::new(1, l.capacity_mbps);
                te.unreserved_mbps = Self::idl_unreserved(&st, &l.id);
                graph.add_link(LinkRecord::new(l.id.clone(), l.layer, l.a.clone(), l.z.clone(), te));
            }
        }
        graph.canonicalize();
        if level == AbstractionLevel::Full {
            return AbstractTopology {
                level,
                graph,
                stale,
                summarizes: BTreeMap::new(),
            };
        }

        let tech_of = |p: &Identifier| self.domains.get(p.domain()).copied();
        let mut agg = TopologyGraph::new();
        let mut agg_stale = BTreeSet::new();
        let mut pairs: BTreeMap<(String, String), Vec<Identifier>> = BTreeMap::new();
        for l in st.idls.values() {
            let (da, dz) = (l.a.domain().to_string(), l.z.domain().to_string());
            let key = if da <= dz { (da, dz) } else { (dz, da) };
            pairs.entry(key).or_default().push(l.id.clone());
        }
        let node_id = |d: &str| Identifier::new(SDTN_DOMAIN, d).expect("valid id");
        for name in self.domains.keys() {
            if only.is_some_and(|d| d != name) {
                continue;
            }
            let id = node_id(name);
            let ports = pairs
                .keys()
                .filter_map(|(a, z)| {
                    if a == name {
                        Some(id.port(z))
                    } else if z == name {
                        Some(id.port(a))
                    } else {
                        None
                    }
                })
                .collect();
            if st.offline.contains(name) {
                agg_stale.insert(id.clone());
            }
            agg.add_node(NodeRecord {
                id,
                technology: self.domains[name],
                ports,
            });
        }
        let mut summarizes = BTreeMap::new();
        for ((da, dz), idls) in &pairs {
            if only.is_some() || !self.domains.contains_key(da) || !self.domains.contains_key(dz) {
                continue;
            }
            let sum: Mbps = idls.iter().map(|i| Self::idl_unreserved(&st, i)).sum();
            let bottleneck = |d: &str| -> Mbps {
                if st.offline.contains(d) {
                    return 0;
                }
                idls.iter()
                    .flat_map(|i| [&st.idls[i].a, &st.idls[i].z])
                    .filter(|p| p.domain() == d)
                    .map(|p| self.bottleneck(tech_of(p).expect("known domain"), &p.node()))
                    .max()
                    .unwrap_or(0)
            };
            let cap = sum.min(bottleneck(da)).min(bottleneck(dz));
            let id = Identifier::new(SDTN_DOMAIN, format!("{da}--{dz}")).expect("valid id");
            let layer = st.idls[&idls[0]].layer;
            agg.add_link(LinkRecord::new(
                id.clone(),
                layer,
                node_id(da).port(dz),
                node_id(dz).port(da),
                TeAttributes::new(1, cap),
            ));
            summarizes.insert(id, idls.clone());
        }
        agg.canonicalize();
        AbstractTopology {
            level,
            graph: agg,
            stale: agg_stale,
            summarizes,
        }
    }

    fn technology_of(&self, p: &Identifier) -> Result<Technology, SdtnError> {
        self.domains
            .get(p.domain())
            .copied()
            .ok_or_else(|| SdtnError::InvalidIntent(format!("{p}: unknown domain {:?}", p.domain())))
    }

    fn check_endpoint(&self, p: &Identifier) -> Result<(), SdtnError> {
        let tech = self.technology_of(p)?;
        if !p.is_port() {
            return Err(SdtnError::InvalidIntent(format!("{p} is not a port")));
        }
        let g = self.domain_graph(tech);
        let known = g.node(&p.node()).is_some_and(|n| n.ports.contains(p));
        if known {
            Ok(())
        } else {
            Err(SdtnError::InvalidIntent(format!("unknown port {p}")))
        }
    }

    /// Shortest domain sequence by hop count, lexicographically smallest among
    /// equals, over inter-domain links with room for `mbps`.
    fn domain_sequence(st: &SdtnState, from: &str, to: &str, mbps: Mbps, excludes: &BTreeSet<Identifier>) -> Option<Vec<String>> {
        if st.offline.contains(from) || st.offline.contains(to) {
            return None;
        }
        if from == to {
            return Some(vec![from.to_string()]);
        }
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for l in st.idls.values() {
            if excludes.contains(&l.id) || Self::idl_unreserved(st, &l.id) < mbps {
                continue;
            }
            let (a, z) = (l.a.domain(), l.z.domain());
            if st.offline.contains(a) || st.offline.contains(z) {
                continue;
            }
            adj.entry(a).or_default().insert(z);
            adj.entry(z).or_default().insert(a);
        }
        let mut best: Option<Vec<String>> = None;
        let mut stack: Vec<Vec<&str>> = vec![vec![from]];
        while let Some(seq) = stack.pop() {
            let last = *seq.last().expect("non-empty");
            if last == to {
                let cand: Vec<String> = seq.iter().map(|s| s.to_string()).collect();
                let better = match &best {
                    None => true,
                    Some(b) => (cand.len(), &cand) < (b.len(), b),
                };
                if better {
                    best = Some(cand);
                }
                continue;
            }
            for next in adj.get(last).into_iter().flatten() {
                if !seq.contains(next) {
                    let mut s = seq.clone();
                    s.push(next);
                    stack.push(s);
                }
            }
        }
        best
    }

    fn plan(&self, intent: &ServiceIntent) -> Result<Plan, PlanError> {
        let st = self.state.lock();
        self.plan_in(&st, intent)
    }

    fn plan_in(&self, st: &SdtnState, intent: &ServiceIntent) -> Result<Plan, PlanError> {
        let (da, dz) = (intent.a.domain(), intent.z.domain());
        let seq = Self::domain_sequence(st, da, dz, intent.requested_mbps, &intent.excludes).ok_or(PlanError::NoDomainPath)?;
        let mut idls = Vec::new();
        for w in seq.windows(2) {
            let idl = st
                .idls
                .values()
                .filter(|l| !intent.excludes.contains(&l.id) && Self::idl_unreserved(st, &l.id) >= intent.requested_mbps)
                .find(|l| {
                    (l.a.domain() == w[0] && l.z.domain() == w[1]) || (l.z.domain() == w[0] && l.a.domain() == w[1])
                })
                .expect("domain sequence follows usable links");
            idls.push(idl.clone());
        }
        let mut segments = Vec::new();
        let mut entry = intent.a.clone();
        for (i, d) in seq.iter().enumerate() {
            let (exit, next_entry) = match idls.get(i) {
                Some(l) if l.a.domain() == d => (l.a.clone(), Some(l.z.clone())),
                Some(l) => (l.z.clone(), Some(l.a.clone())),
                None => (intent.z.clone(), None),
            };
            segments.push(SubIntent {
                domain: d.clone(),
                technology: self.domains[d],
                entry,
                exit,
                requested_mbps: intent.requested_mbps,
                excludes: intent.excludes.iter().filter(|e| e.domain() == d).cloned().collect(),
            });
            if let Some(n) = next_entry {
                entry = n;
            } else {
                break;
            }
        }
        for sub in &segments {
            self.check(sub)?;
        }
        Ok(Plan {
            segments,
            inter_domain_links: idls.into_iter().map(|l| l.id).collect(),
        })
    }

    /// Path-checks one sub-intent without reserving.
    fn check(&self, sub: &SubIntent) -> Result<(), PlanError> {
        let infeasible = |reason: String, no_path: bool| PlanError::Infeasible {
            sub: Box::new(sub.clone()),
            reason,
            no_path,
        };
        match sub.technology {
            Technology::Ip => match self.ip.compute_path(&sub.entry.node(), &sub.exit.node(), sub.requested_mbps, &sub.excludes) {
                Ok(_) => Ok(()),
                Err(IpError::NoPath(r)) => Err(infeasible(no_path_reason(r), true)),
                Err(e) => Err(infeasible(e.to_string(), false)),
            },
            Technology::Optical => {
                let rate = odu_for(sub.requested_mbps, &OduRate::ALL).ok_or_else(|| infeasible("exceeds ODU4".into(), false))?;
                match self.optical.check_odu(&sub.entry, &sub.exit, rate.mbps()) {
                    Ok(()) => Ok(()),
                    Err(OpticalError::Blocked) => Err(infeasible("capacity".into(), false)),
                    Err(e) => Err(infeasible(e.to_string(), false)),
                }
            }
            Technology::Mw => match self.mw.compute_path(&sub.entry.node(), &sub.exit.node(), sub.requested_mbps, &sub.excludes) {
                Ok(_) => Ok(()),
                Err(MwError::NoPath(crate::path::PathError::NoPath(r))) => Err(infeasible(no_path_reason(r), false)),
                Err(e) => Err(infeasible(e.to_string(), false)),
            },
        }
    }

    pub fn compute_e2e(&self, intent: &ServiceIntent) -> Result<Plan, SdtnError> {
        intent.validate(false).map_err(intent_error)?;
        self.check_endpoint(&intent.a)?;
        self.check_endpoint(&intent.z)?;
        Ok(self.plan(intent)?)
    }

    /// Makes the next `phase` step in `domain` fail once.
    pub fn arm_fault(&self, phase: Phase, domain: &str) -> bool {
        if !self.domains.contains_key(domain) {
            return false;
        }
        self.armed.lock().insert((phase, domain.to_string()));
        true
    }

    fn take_fault(&self, phase: Phase, domain: &str) -> bool {
        self.armed.lock().remove(&(phase, domain.to_string()))
    }

    fn reserve(&self, sub: &SubIntent) -> Result<Identifier, String> {
        if self.take_fault(Phase::Reserve, &sub.domain) {
            return Err("injected reserve failure".into());
        }
        self.reserve_in(sub)
    }

    fn reserve_in(&self, sub: &SubIntent) -> Result<Identifier, String> {
        match sub.technology {
            Technology::Ip => self
                .ip
                .reserve_lsp(&sub.entry.node(), &sub.exit.node(), sub.requested_mbps, &sub.excludes)
                .map_err(|e| e.to_string()),
            Technology::Optical => {
                let rate = odu_for(sub.requested_mbps, &OduRate::ALL).ok_or("exceeds ODU4")?;
                self.optical.reserve_odu(&sub.entry, &sub.exit, rate).map_err(|e| e.to_string())
            }
            Technology::Mw => self
                .mw
                .reserve(&sub.entry.node(), &sub.exit.node(), sub.requested_mbps, &sub.excludes)
                .map_err(|e| e.to_string()),
        }
    }

    fn commit(&self, domain: &str, tech: Technology, rec: &Identifier) -> Result<(), String> {
        if self.take_fault(Phase::Commit, domain) {
            // a failed commit leaves nothing reserved in the domain
            self.rollback(tech, rec)?;
            return Err("injected commit failure".into());
        }
        self.commit_in(tech, rec)
    }

    fn commit_in(&self, tech: Technology, rec: &Identifier) -> Result<(), String> {
        match tech {
            Technology::Ip => self.ip.commit_lsp(rec).map(|_| ()).map_err(|e| e.to_string()),
            Technology::Optical => self.optical.commit_odu(rec).map(|_| ()).map_err(|e| e.to_string()),
            Technology::Mw => self.mw.commit(rec).map_err(|e| e.to_string()),
        }
    }

    fn rollback(&self, tech: Technology, rec: &Identifier) -> Result<(), String> {
        match tech {
            Technology::Ip => self.ip.rollback_lsp(rec).map_err(|e| e.to_string()),
            Technology::Optical => self.optical.rollback_odu(rec).map_err(|e| e.to_string()),
            Technology::Mw => self.mw.rollback(rec).map_err(|e| e.to_string()),
        }
    }

    fn release(&self, tech: Technology, rec: &Identifier) -> Result<(), String> {
        match tech {
            Technology::Ip => self.ip.teardown_lsp(rec).map_err(|e| e.to_string()),
            Technology::Optical => self.optical.teardown_odu(rec).map_err(|e| e.to_string()),
            Technology::Mw => self.mw.release(rec).map_err(|e| e.to_string()),
        }
    }

    fn record_state(&self, tech: Technology, rec: &Identifier) -> Option<ServiceState> {
        match tech {
            Technology::Ip => self.ip.lsp(rec).ok().map(|l| l.state),
            Technology::Optical => self.optical.odu(rec).ok().map(|o| o.state),
            Technology::Mw => self.mw.allocation(rec).ok().map(|a| a.state),
        }
    }

    /// Concrete links walked by a segment, in order.
    fn segment_links(&self, seg: &Segment) -> Vec<Identifier> {
        let Some(rec) = &seg.record else {
            return Vec::new();
        };
        match seg.sub.technology {
            Technology::Ip => self.ip.lsp(rec).map(|l| l.ero).unwrap_or_default(),
            Technology::Optical => self
                .optical
                .odu(rec)
                .and_then(|o| self.optical.och(&o.carrier))
                .map(|c| c.path)
                .unwrap_or_default(),
            Technology::Mw => self.mw.allocation(rec).map(|a| a.links).unwrap_or_default(),
        }
    }

    /// Every concrete link of the service, inter-domain links included.
    pub fn service_path(&self, id: &Identifier) -> Result<Vec<Identifier>, SdtnError> {
        let svc = self.service(id)?;
        let mut out = Vec::new();
        for (i, seg) in svc.segments.iter().enumerate() {
            out.extend(self.segment_links(seg));
            if let Some(l) = svc.inter_domain_links.get(i) {
                out.push(l.clone());
            }
        }
        Ok(out)
    }

    /// Reverse-order undo of everything the service holds. Leaves the service
    /// FAILED.
    fn rollback_service(&self, st: &mut SdtnState, n: u64) -> Result<(), String> {
        let mut errors = Vec::new();
        let svc_id = st.services[&n].id.clone();
        for l in st.services[&n].inter_domain_links.clone() {
            if let Some(e) = st.idl_ledger.get_mut(&l) {
                e.remove(&svc_id);
            }
        }
        let svc = st.services.get_mut(&n).expect("present");
        for i in (0..svc.segments.len()).rev() {
            let seg = &svc.segments[i];
            let Some(rec) = seg.record.clone() else { continue };
            if !seg.state.holds_resources() {
                continue;
            }
            let tech = seg.sub.technology;
            let r = self.rollback(tech, &rec);
            let next = if svc.segments[i].state == ServiceState::Active {
                ServiceState::Deleted
            } else {
                ServiceState::Failed
            };
            if let Err(e) = &r {
                errors.push(format!("{rec}: {e}"));
            } else {
                svc.segments[i].state = next;
            }
            svc.log(LogAction::Rollback, &rec, r);
        }
        svc.state = ServiceState::Failed;
        svc.log(LogAction::Fail, &svc_id, Ok(()));
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors.join("; "))
        }
    }

    /// Runs both phases for a planned service.
    fn execute(&self, st: &mut SdtnState, n: u64, plan: Plan) -> Result<(), SdtnError> {
        let svc = st.services.get_mut(&n).expect("present");
        let svc_id = svc.id.clone();
        svc.segments = plan
            .segments
            .into_iter()
            .map(|sub| Segment {
                sub,
                record: None,
                state: ServiceState::Planned,
            })
            .collect();
        svc.inter_domain_links = plan.inter_domain_links.clone();

        for i in 0..svc.segments.len() {
            let sub = svc.segments[i].sub.clone();
            match self.reserve(&sub) {
                Ok(rec) => {
                    svc.log(LogAction::Reserve, &rec, Ok(()));
                    svc.segments[i].record = Some(rec);
                    svc.segments[i].state = ServiceState::Reserved;
                }
                Err(reason) => {
                    svc.log(LogAction::Reserve, &sub.domain, Err(reason.clone()));
                    svc.segments[i].state = ServiceState::Failed;
                    return Err(self.fail(st, n, SdtnError::ReserveFailed {
                        service: svc_id,
                        domain: sub.domain,
                        reason,
                    }));
                }
            }
        }
        let mbps = svc.intent.requested_mbps;
        for l in &plan.inter_domain_links {
            st.idl_ledger.get_mut(l).expect("planned links exist").insert(svc_id.clone(), mbps);
        }
        let svc = st.services.get_mut(&n).expect("present");
        svc.state = ServiceState::Reserved;

        for i in 0..svc.segments.len() {
            let seg = &svc.segments[i];
            let rec = seg.record.clone().expect("reserved");
            let (tech, domain) = (seg.sub.technology, seg.sub.domain.clone());
            match self.commit(&domain, tech, &rec) {
                Ok(()) => {
                    svc.log(LogAction::Commit, &rec, Ok(()));
                    svc.segments[i].state = ServiceState::Active;
                }
                Err(reason) => {
                    svc.log(LogAction::Commit, &rec, Err(reason.clone()));
                    // the domain already released its own reservation
                    svc.segments[i].state = self.record_state(tech, &rec).unwrap_or(ServiceState::Failed);
                    return Err(self.fail(st, n, SdtnError::CommitFailed {
                        service: svc_id,
                        domain,
                        reason,
                    }));
                }
            }
        }
        let svc = st.services.get_mut(&n).expect("present");
        svc.state = ServiceState::Active;
        svc.log(LogAction::Activate, &svc_id, Ok(()));
        Ok(())
    }

    fn fail(&self, st: &mut SdtnState, n: u64, err: SdtnError) -> SdtnError {
        match self.rollback_service(st, n) {
            Ok(()) => err,
            Err(detail) => {
                tracing::error!(service = %st.services[&n].id, %detail, "rollback incomplete");
                SdtnError::RollbackIncomplete {
                    service: st.services[&n].id.clone(),
                    detail: format!("{err}; {detail}"),
                }
            }
        }
    }

    fn block(&self, intent: &ServiceIntent, err: SdtnError, code: &str) -> SdtnError {
        self.state.lock().blocked.push(BlockedRequest {
            intent: intent.clone(),
            code: code.to_string(),
            detail: err.to_string(),
        });
        err
    }

    /// Plans, augmenting the IP layer over optical once if IP has no path.
    fn plan_with_augment(&self, intent: &ServiceIntent) -> Result<(Plan, Option<AugmentedLink>), SdtnError> {
        match self.plan(intent) {
            Ok(p) => Ok((p, None)),
            Err(PlanError::Infeasible { sub, no_path: true, .. })
                if self.config.augment_enabled && sub.technology == Technology::Ip =>
            {
                let (head, tail) = (sub.entry.node(), sub.exit.node());
                let (aug, _) = self.multilayer_augment(&head, &tail, sub.requested_mbps)?;
                Ok((self.plan(intent)?, Some(aug)))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn provision_e2e(&self, intent: &ServiceIntent) -> Result<E2eService, SdtnError> {
        intent.validate(false).map_err(intent_error)?;
        self.check_endpoint(&intent.a)?;
        self.check_endpoint(&intent.z)?;
        let (plan, augmented) = match self.plan_with_augment(intent) {
            Ok(p) => p,
            Err(e) => {
                let code = match &e {
                    SdtnError::NoDomainPath => "NO_DOMAIN_PATH",
                    SdtnError::DomainInfeasible { .. } => "DOMAIN_INFEASIBLE",
                    SdtnError::OpticalBlocked(_) => "OPTICAL_BLOCKED",
                    SdtnError::StillNoPath(_) => "STILL_NO_PATH",
                    _ => "BLOCKED",
                };
                return Err(self.block(intent, e, code));
            }
        };
        let mut st = self.state.lock();
        let n = st.next_service;
        st.next_service += 1;
        let id = Identifier::new(SDTN_DOMAIN, format!("svc-{n}")).expect("valid id");
        st.services.insert(
            n,
            E2eService {
                id,
                intent: intent.clone(),
                state: ServiceState::Planned,
                segments: Vec::new(),
                inter_domain_links: Vec::new(),
                transaction_log: Vec::new(),
            },
        );
        if let Some(aug) = augmented {
            st.services.get_mut(&n).expect("present").log(LogAction::Augment, &aug.link, Ok(()));
        }
        self.execute(&mut st, n, plan)?;
        Ok(st.services[&n].clone())
    }

    fn service_key(st: &SdtnState, id: &Identifier) -> Result<u64, SdtnError> {
        id.local()
            .strip_prefix("svc-")
            .and_then(|s| s.parse().ok())
            .filter(|n| id.domain() == SDTN_DOMAIN && st.services.contains_key(n))
            .ok_or_else(|| SdtnError::UnknownService(id.clone()))
    }

    pub fn service(&self, id: &Identifier) -> Result<E2eService, SdtnError> {
        let st = self.state.lock();
        let n = Self::service_key(&st, id)?;
        Ok(st.services[&n].clone())
    }

    pub fn services(&self) -> Vec<E2eService> {
        self.state.lock().services.values().cloned().collect()
    }

    /// Releases every held segment in reverse order. Stops at the first
    /// domain error; a retry resumes where it stopped.
    /// Releases every active segment in reverse order. All or nothing: if a
    /// release fails, the segments already released are set up again.
    fn release_segments(&self, st: &mut SdtnState, n: u64) -> Result<(), String> {
        let svc = st.services.get_mut(&n).expect("present");
        let mut released: Vec<usize> = Vec::new();
        for i in (0..svc.segments.len()).rev() {
            let seg = &svc.segments[i];
            if seg.state != ServiceState::Active {
                continue;
            }
            let rec = seg.record.clone().expect("active segments have records");
            let r = self.release(seg.sub.technology, &rec);
            svc.log(LogAction::Release, &rec, r.clone());
            if let Err(reason) = r {
                for j in released.into_iter().rev() {
                    let sub = svc.segments[j].sub.clone();
                    match self.establish(&sub) {
                        Ok(rec) => {
                            svc.log(LogAction::Commit, &rec, Ok(()));
                            svc.segments[j].record = Some(rec);
                            svc.segments[j].state = ServiceState::Active;
                        }
                        Err(e) => {
                            svc.log(LogAction::Commit, &sub.domain, Err(e.clone()));
                            return Err(format!("{reason}; restoring {} failed: {e}", sub.domain));
                        }
                    }
                }
                return Err(reason);
            }
            svc.segments[i].state = ServiceState::Deleted;
            released.push(i);
        }
        let svc_id = svc.id.clone();
        for l in svc.inter_domain_links.clone() {
            if let Some(e) = st.idl_ledger.get_mut(&l) {
                e.remove(&svc_id);
            }
        }
        Ok(())
    }

    /// Reserve and commit outside the provisioning path, so armed phase
    /// faults are left for the next provisioning call.
    fn establish(&self, sub: &SubIntent) -> Result<Identifier, String> {
        let rec = self.reserve_in(sub)?;
        let committed = self.commit_in(sub.technology, &rec);
        if let Err(e) = committed {
            if self.record_state(sub.technology, &rec) == Some(ServiceState::Reserved) {
                self.rollback(sub.technology, &rec)?;
            }
            return Err(e);
        }
        Ok(rec)
    }

    pub fn teardown_e2e(&self, id: &Identifier) -> Result<E2eService, SdtnError> {
        let mut st = self.state.lock();
        let n = Self::service_key(&st, id)?;
        match st.services[&n].state {
            ServiceState::Active => {
                self.release_segments(&mut st, n)
                    .map_err(|detail| SdtnError::TeardownIncomplete { service: id.clone(), detail })?;
            }
            ServiceState::Failed => {}
            state => return Err(SdtnError::BadState { id: id.clone(), state }),
        }
        let svc = st.services.get_mut(&n).expect("present");
        svc.state = ServiceState::Deleted;
        svc.log(LogAction::Delete, id, Ok(()));
        Ok(svc.clone())
    }

    /// Orders an ODU between the routers' attachment ROADMs and exposes it to
    /// IP as a new link, then retries the IP computation once.
    pub fn multilayer_augment(&self, head: &Identifier, tail: &Identifier, mbps: Mbps) -> Result<(AugmentedLink, Route), SdtnError> {
        let (ha, ta) = {
            let st = self.state.lock();
            let find = |r: &Identifier| {
                st.attachments
                    .iter()
                    .find(|a| &a.router_port.node() == r)
                    .cloned()
                    .ok_or_else(|| SdtnError::NoAttachment(r.clone()))
            };
            (find(head)?, find(tail)?)
        };
        let rate = odu_for(mbps, &[OduRate::Odu2, OduRate::Odu4])
            .ok_or_else(|| SdtnError::OpticalBlocked(format!("{mbps} Mbps exceeds ODU4")))?;
        let odu = self
            .optical
            .setup_odu(&ha.roadm_port, &ta.roadm_port, rate)
            .map_err(|e| SdtnError::OpticalBlocked(e.to_string()))?;
        let k = self.state.lock().augmented.len() + 1;
        let sub = |p: &Identifier| p.node().port(&format!("{}.{k}", p.port_name().unwrap_or_default()));
        let ip_domain = head.domain();
        let link_id = Identifier::new(ip_domain, format!("{}-{}.aug{k}", head.local(), tail.local())).expect("valid id");
        let adj = Adjacency {
            id: link_id.clone(),
            a: sub(&ha.router_port),
            z: sub(&ta.router_port),
            te_metric: self.config.augment_metric,
            capacity_mbps: rate.mbps(),
        };
        if let Err(e) = self.ip.register_link(adj) {
            let _ = self.optical.teardown_odu(&odu.id);
            return Err(SdtnError::OpticalBlocked(format!("registering IP link failed: {e}")));
        }
        let retry = self.ip.compute_path(head, tail, mbps, &BTreeSet::new());
        let record = AugmentedLink {
            link: link_id.clone(),
            odu: odu.id,
            head: head.clone(),
            tail: tail.clone(),
            flagged: retry.is_err(),
        };
        self.state.lock().augmented.push(record.clone());
        match retry {
            Ok(route) => Ok((record, route)),
            Err(_) => {
                tracing::warn!(link = %link_id, "augmented link did not make the demand routable");
                Err(SdtnError::StillNoPath(link_id))
            }
        }
    }

    /// Reacts to a radio capacity drop: while the link is over-booked,
    /// affected services are re-provisioned in ascending id order.
    pub fn handle_capacity_change(&self, change: &CapacityChange) -> RerouteReport {
        let mut report = RerouteReport {
            change: change.clone(),
            outcomes: Vec::new(),
        };
        let mut st = self.state.lock();
        let affected: Vec<u64> = st
            .services
            .iter()
            .filter(|(_, s)| s.state == ServiceState::Active)
            .filter(|(_, s)| {
                s.segments.iter().any(|seg| {
                    seg.sub.technology == Technology::Mw
                        && seg
                            .record
                            .as_ref()
                            .and_then(|r| self.mw.allocation(r).ok())
                            .is_some_and(|a| a.links.contains(&change.link))
                })
            })
            .map(|(n, _)| *n)
            .collect();
        for n in affected {
            if self.mw.allocated_on(&change.link) <= change.new_mbps {
                break;
            }
            let outcome = self.reroute(&mut st, n);
            report.outcomes.push((st.services[&n].id.clone(), outcome));
        }
        report
    }

    fn reroute(&self, st: &mut SdtnState, n: u64) -> RerouteOutcome {
        let id = st.services[&n].id.clone();
        if let Err(detail) = self.release_segments(st, n) {
            tracing::error!(service = %id, %detail, "reroute could not release segments");
            return RerouteOutcome::Failed;
        }
        let svc = st.services.get_mut(&n).expect("present");
        // the lifecycle restarts from PLANNED for the new chain
        svc.state = ServiceState::Planned;
        svc.log(LogAction::Restart, &id, Ok(()));
        let intent = svc.intent.clone();
        let plan = self.plan_in(st, &intent);
        match plan {
            Ok(p) => match self.execute(st, n, p) {
                Ok(()) => RerouteOutcome::Rerouted,
                Err(_) => RerouteOutcome::Failed,
            },
            Err(e) => {
                let svc = st.services.get_mut(&n).expect("present");
                svc.log(LogAction::Reserve, &id, Err(SdtnError::from(e).to_string()));
                svc.state = ServiceState::Failed;
                svc.log(LogAction::Fail, &id, Ok(()));
                RerouteOutcome::Failed
            }
        }
    }

    /// Drains pending capacity notices and handles each in arrival order.
    pub fn process_notices(&self) -> Vec<RerouteReport> {
        let notices: Vec<CapacityChange> = self.notices.lock().try_iter().collect();
        notices.iter().map(|c| self.handle_capacity_change(c)).collect()
    }

    /// Inter-domain ledger bounds and segment contiguity of active services.
    pub fn audit(&self) -> Vec<String> {
        let st = self.state.lock();
        let mut out = Vec::new();
        for (l, entries) in &st.idl_ledger {
            let used: Mbps = entries.values().sum();
            if used > st.idls[l].capacity_mbps {
                out.push(format!("inter-domain link {l}: {used} exceeds capacity"));
            }
            for holder in entries.keys() {
                let live = Self::service_key(&st, holder)
                    .ok()
                    .map(|n| &st.services[&n])
                    .is_some_and(|s| s.state.holds_resources() && s.inter_domain_links.contains(l));
                if !live {
                    out.push(format!("inter-domain link {l}: orphan reservation {holder}"));
                }
            }
        }
        for s in st.services.values().filter(|s| s.state == ServiceState::Active) {
            let segs = &s.segments;
            if segs.first().map(|g| &g.sub.entry) != Some(&s.intent.a) || segs.last().map(|g| &g.sub.exit) != Some(&s.intent.z) {
                out.push(format!("{}: segment chain does not match intent endpoints", s.id));
            }
            if s.inter_domain_links.len() + 1 != segs.len() {
                out.push(format!("{}: {} segments but {} inter-domain links", s.id, segs.len(), s.inter_domain_links.len()));
                continue;
            }
            for (i, l) in s.inter_domain_links.iter().enumerate() {
                let Some(idl) = st.idls.get(l) else {
                    out.push(format!("{}: unknown inter-domain link {l}", s.id));
                    continue;
                };
                let (x, y) = (&segs[i].sub.exit, &segs[i + 1].sub.entry);
                if !((x == &idl.a && y == &idl.z) || (x == &idl.z && y == &idl.a)) {
                    out.push(format!("{}: {l} does not join segments {i} and {}", s.id, i + 1));
                }
                if st.idl_ledger[l].get(&s.id) != Some(&s.intent.requested_mbps) {
                    out.push(format!("{}: missing reservation on {l}", s.id));
                }
            }
            for seg in segs {
                let live = seg
                    .record
                    .as_ref()
                    .and_then(|r| self.record_state(seg.sub.technology, r))
                    == Some(ServiceState::Active);
                if seg.state != ServiceState::Active || !live {
                    out.push(format!("{}: segment in {} not active", s.id, seg.sub.domain));
                }
            }
        }
        out
    }

    pub fn ledger_snapshot(&self) -> serde_json::Value {
        let st = self.state.lock();
        serde_json::json!({ "inter_domain": st.idl_ledger })
    }
}

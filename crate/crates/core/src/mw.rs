// SPDX-License-Identifier: Apache-2.0

//! Microwave domain controller: unified air-interface model, vendor-agnostic
//! link configuration (native devices directly, legacy ones via mediation),
//! adaptive-modulation capacity tracking and per-link bandwidth allocations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::config::{Edit, LeafValue};
use crate::device::{NotificationEvent, NotificationKind};
use crate::model::{Identifier, LayerTag, LinkRecord, Mbps, NodeRecord, ServiceState, TeAttributes, Technology, TopologyGraph};
use crate::path::{cspf, widest_from, PathError, Route};
use crate::sbi::{ConfigTxn, SbiError, Southbound};

/// Modulation order M. Ordering follows M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "QAM16")]
    Qam16,
    #[serde(rename = "QAM64")]
    Qam64,
    #[serde(rename = "QAM256")]
    Qam256,
    #[serde(rename = "QAM1024")]
    Qam1024,
}

impl Modulation {
    pub const ALL: [Modulation; 5] = [
        Modulation::Qpsk,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Qam256,
        Modulation::Qam1024,
    ];

    pub fn order(self) -> u32 {
        match self {
            Modulation::Qpsk => 4,
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
            Modulation::Qam256 => 256,
            Modulation::Qam1024 => 1024,
        }
    }

    /// log2(M): bits per symbol.
    pub fn bits_per_symbol(self) -> u32 {
        self.order().trailing_zeros()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "QAM16",
            Modulation::Qam64 => "QAM64",
            Modulation::Qam256 => "QAM256",
            Modulation::Qam1024 => "QAM1024",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modulation::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown modulation {s:?}"))
    }
}

pub const CHANNEL_BANDWIDTHS_MHZ: [u32; 5] = [7, 14, 28, 56, 112];

/// floor(bandwidth_mhz × log2(M) × 0.9), in exact integer arithmetic.
pub fn capacity_mbps(channel_bandwidth_mhz: u32, modulation: Modulation) -> Mbps {
    u64::from(channel_bandwidth_mhz) * u64::from(modulation.bits_per_symbol()) * 9 / 10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AirInterfaceConfig {
    pub channel_bandwidth_mhz: u32,
    pub modulation_min: Modulation,
    pub modulation_max: Modulation,
    pub adaptive: bool,
    pub tx_power_dbm: i32,
    #[serde(default = "default_frequency")]
    pub tx_frequency_khz: u64,
}

fn default_frequency() -> u64 {
    18_000_000
}

impl AirInterfaceConfig {
    pub fn check(&self) -> Result<(), String> {
        if !CHANNEL_BANDWIDTHS_MHZ.contains(&self.channel_bandwidth_mhz) {
            return Err(format!("channel bandwidth {} MHz not supported", self.channel_bandwidth_mhz));
        }
        if self.modulation_min > self.modulation_max {
            return Err("modulation_min above modulation_max".into());
        }
        if !self.adaptive && self.modulation_min != self.modulation_max {
            return Err("fixed modulation requires modulation_min == modulation_max".into());
        }
        if !(-10..=35).contains(&self.tx_power_dbm) {
            return Err(format!("tx power {} dBm outside [-10, 35]", self.tx_power_dbm));
        }
        if self.tx_frequency_khz == 0 {
            return Err("tx frequency must be positive".into());
        }
        Ok(())
    }

    pub fn edits(&self, radio: &str) -> Vec<Edit> {
        let p = |leaf: &str| format!("/air-interface/{radio}/{leaf}");
        vec![
            Edit::set(p("adaptive"), self.adaptive),
            Edit::set(p("channel_bandwidth_mhz"), i64::from(self.channel_bandwidth_mhz)),
            Edit::set(p("modulation_max"), self.modulation_max.as_str()),
            Edit::set(p("modulation_min"), self.modulation_min.as_str()),
            Edit::set(p("tx_frequency_khz"), self.tx_frequency_khz as i64),
            Edit::set(p("tx_power_dbm"), i64::from(self.tx_power_dbm)),
        ]
    }

    /// Reads a radio's configuration back from a standard-model tree.
    pub fn from_tree(tree: &crate::device::config::ConfigTree, radio: &str) -> Option<Self> {
        let get = |leaf: &str| tree.get(&format!("/air-interface/{radio}/{leaf}"));
        let modulation = |leaf: &str| get(leaf).and_then(LeafValue::as_str).and_then(|s| s.parse().ok());
        Some(Self {
            channel_bandwidth_mhz: u32::try_from(get("channel_bandwidth_mhz")?.as_int()?).ok()?,
            modulation_min: modulation("modulation_min")?,
            modulation_max: modulation("modulation_max")?,
            adaptive: get("adaptive")?.as_bool()?,
            tx_power_dbm: i32::try_from(get("tx_power_dbm")?.as_int()?).ok()?,
            tx_frequency_khz: u64::try_from(get("tx_frequency_khz")?.as_int()?).ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MwLink {
    pub id: Identifier,
    /// (device, radio) at each end, as port identifiers.
    pub a: Identifier,
    pub z: Identifier,
    pub config: AirInterfaceConfig,
    pub current_modulation: Modulation,
    pub oper_up: bool,
    /// Set when a device reported an out-of-range modulation.
    pub quarantined: bool,
}

impl MwLink {
    pub fn effective_capacity(&self) -> Result<Mbps, MwError> {
        if !self.oper_up {
            return Err(MwError::LinkDown(self.id.clone()));
        }
        Ok(capacity_mbps(self.config.channel_bandwidth_mhz, self.current_modulation))
    }

    fn capacity_or_zero(&self) -> Mbps {
        self.effective_capacity().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityChange {
    pub link: Identifier,
    pub old_mbps: Mbps,
    pub new_mbps: Mbps,
}

/// Bandwidth held on a chain of MW links by one e2e segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MwAllocation {
    pub id: Identifier,
    pub links: Vec<Identifier>,
    pub nodes: Vec<Identifier>,
    pub reserved_mbps: Mbps,
    pub state: ServiceState,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MwError {
    #[error("invalid air-interface configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown link {0}")]
    UnknownLink(Identifier),
    #[error("link {0} is down")]
    LinkDown(Identifier),
    #[error("modulation {modulation} outside configured range on {link}")]
    OutOfRangeModulation { link: Identifier, modulation: Modulation },
    #[error("commit failed: {0}")]
    CommitFailed(SbiError),
    #[error("no path: {0}")]
    NoPath(PathError),
    #[error("unknown allocation {0}")]
    UnknownAllocation(Identifier),
    #[error("allocation {id} is {state}")]
    BadState { id: Identifier, state: ServiceState },
}

struct Pending {
    txn: ConfigTxn,
}

#[derive(Default)]
struct MwState {
    domain: String,
    nodes: BTreeMap<Identifier, BTreeSet<Identifier>>,
    links: BTreeMap<Identifier, MwLink>,
    /// link -> allocation id -> Mbps
    ledger: BTreeMap<Identifier, BTreeMap<Identifier, Mbps>>,
    allocations: BTreeMap<u64, MwAllocation>,
    pending: BTreeMap<u64, Pending>,
    next_alloc: u64,
    subscribers: Vec<Sender<CapacityChange>>,
    device_events: Vec<Receiver<NotificationEvent>>,
}

/// Declaration of a radio hop, as read from the topology file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MwLinkDecl {
    pub id: Identifier,
    pub a: Identifier,
    pub z: Identifier,
    pub config: AirInterfaceConfig,
}

pub struct MwController {
    sbi: Arc<Southbound>,
    state: Mutex<MwState>,
}

impl MwController {
    pub fn new(sbi: Arc<Southbound>, domain: &str) -> Self {
        Self {
            sbi,
            state: Mutex::new(MwState {
                domain: domain.to_string(),
                next_alloc: 1,
                ..Default::default()
            }),
        }
    }

    pub fn domain(&self) -> String {
        self.state.lock().domain.clone()
    }

    /// Registers devices and links, subscribes to device events and pushes the
    /// declared configuration to every link.
    pub fn onboard(&self, nodes: Vec<NodeRecord>, decls: Vec<MwLinkDecl>) -> Result<(), MwError> {
        {
            let mut st = self.state.lock();
            for n in &nodes {
                st.nodes.insert(n.id.clone(), n.ports.clone());
                let next = self
                    .sbi
                    .plane()
                    .event_log(&n.id)
                    .map(|l| l.len() as u64 + 1)
                    .unwrap_or(1);
                if let Ok(rx) = self.sbi.plane().subscribe(&n.id, next) {
                    st.device_events.push(rx);
                }
            }
            for d in &decls {
                let current = self
                    .sbi
                    .running(&d.a.node())
                    .ok()
                    .and_then(|t| AirInterfaceConfig::from_tree(&t, d.a.port_name().unwrap_or_default()))
                    .unwrap_or(d.config);
                st.links.insert(
                    d.id.clone(),
                    MwLink {
                        id: d.id.clone(),
                        a: d.a.clone(),
                        z: d.z.clone(),
                        current_modulation: current.modulation_max,
                        config: current,
                        oper_up: true,
                        quarantined: false,
                    },
                );
                st.ledger.insert(d.id.clone(), BTreeMap::new());
            }
        }
        for d in decls {
            self.configure_link(&d.id, d.config)?;
        }
        // configuration commits are not of interest to the capacity tracker
        self.poll_events();
        Ok(())
    }

    pub fn links(&self) -> Vec<MwLink> {
        self.state.lock().links.values().cloned().collect()
    }

    pub fn link(&self, id: &Identifier) -> Result<MwLink, MwError> {
        self.state
            .lock()
            .links
            .get(id)
            .cloned()
            .ok_or_else(|| MwError::UnknownLink(id.clone()))
    }

    pub fn effective_capacity(&self, id: &Identifier) -> Result<Mbps, MwError> {
        self.link(id)?.effective_capacity()
    }

    pub fn subscribe(&self) -> Receiver<CapacityChange> {
        let (tx, rx) = channel();
        self.state.lock().subscribers.push(tx);
        rx
    }

    fn publish(st: &mut MwState, change: &CapacityChange) {
        st.subscribers.retain(|s| s.send(change.clone()).is_ok());
    }

    /// Configures both ends of a link with identical air-interface settings.
    /// A failure on either end restores the other.
    pub fn configure_link(&self, id: &Identifier, config: AirInterfaceConfig) -> Result<(), MwError> {
        config.check().map_err(MwError::InvalidConfig)?;
        let mut st = self.state.lock();
        let link = st.links.get(id).cloned().ok_or_else(|| MwError::UnknownLink(id.clone()))?;
        let mut txn = ConfigTxn::default();
        for end in [&link.a, &link.z] {
            let radio = end.port_name().unwrap_or_default();
            if let Err(e) = txn.stage(&self.sbi, &end.node(), &config.edits(radio)) {
                txn.abort(&self.sbi);
                return Err(MwError::CommitFailed(e));
            }
        }
        txn.commit(&self.sbi).map_err(MwError::CommitFailed)?;
        let old = link.capacity_or_zero();
        let l = st.links.get_mut(id).expect("checked above");
        l.config = config;
        l.current_modulation = config.modulation_max;
        l.quarantined = false;
        let new = l.capacity_or_zero();
        if old != new {
            Self::publish(
                &mut st,
                &CapacityChange {
                    link: id.clone(),
                    old_mbps: old,
                    new_mbps: new,
                },
            );
        }
        Ok(())
    }

    fn link_at(st: &MwState, device: &Identifier, radio: &str) -> Option<Identifier> {
        st.links
            .values()
            .find(|l| {
                [&l.a, &l.z]
                    .iter()
                    .any(|p| &p.node() == device && p.port_name() == Some(radio))
            })
            .map(|l| l.id.clone())
    }

    /// Applies a modulation report. Returns the capacity change, if any.
    pub fn on_modulation_change(
        &self,
        device: &Identifier,
        radio: &str,
        modulation: Modulation,
    ) -> Result<Option<CapacityChange>, MwError> {
        let mut st = self.state.lock();
        let id = Self::link_at(&st, device, radio).ok_or_else(|| MwError::UnknownLink(device.port(radio)))?;
        let link = st.links.get_mut(&id).expect("found above");
        if modulation < link.config.modulation_min || modulation > link.config.modulation_max {
            link.quarantined = true;
            return Err(MwError::OutOfRangeModulation { link: id, modulation });
        }
        if modulation == link.current_modulation {
            return Ok(None);
        }
        let old = link.capacity_or_zero();
        link.current_modulation = modulation;
        let new = link.capacity_or_zero();
        let change = CapacityChange {
            link: id,
            old_mbps: old,
            new_mbps: new,
        };
        Self::publish(&mut st, &change);
        Ok(Some(change))
    }

    fn on_oper_change(&self, device: &Identifier, radio: &str, up: bool) -> Option<CapacityChange> {
        let mut st = self.state.lock();
        let id = Self::link_at(&st, device, radio)?;
        let link = st.links.get_mut(&id)?;
        if link.oper_up == up {
            return None;
        }
        let old = link.capacity_or_zero();
        link.oper_up = up;
        let new = link.capacity_or_zero();
        let change = CapacityChange {
            link: id,
            old_mbps: old,
            new_mbps: new,
        };
        Self::publish(&mut st, &change);
        Some(change)
    }

    /// Drains device notifications and applies radio state changes in arrival
    /// order. Returns the resulting capacity changes and rejected events.
    pub fn poll_events(&self) -> (Vec<CapacityChange>, Vec<MwError>) {
        let events: Vec<NotificationEvent> = {
            let st = self.state.lock();
            st.device_events.iter().flat_map(|rx| rx.try_iter()).collect()
        };
        let mut changes = Vec::new();
        let mut errors = Vec::new();
        for ev in events {
            let radio = ev.payload.get("interface").and_then(|v| v.as_str()).unwrap_or_default();
            match ev.kind {
                NotificationKind::ModulationChange => {
                    let Some(m) = ev
                        .payload
                        .get("modulation")
                        .and_then(|v| serde_json::from_value::<Modulation>(v.clone()).ok())
                    else {
                        continue;
                    };
                    match self.on_modulation_change(&ev.device, radio, m) {
                        Ok(Some(c)) => changes.push(c),
                        Ok(None) => {}
                        Err(e) => errors.push(e),
                    }
                }
                NotificationKind::LinkDown | NotificationKind::LinkUp => {
                    let up = ev.kind == NotificationKind::LinkUp;
                    changes.extend(self.on_oper_change(&ev.device, radio, up));
                }
                _ => {}
            }
        }
        (changes, errors)
    }

    /// MW links as a TE graph: capacity = effective capacity, unreserved =
    /// capacity minus allocations (saturating), metric 1 per hop.
    pub fn topology(&self) -> TopologyGraph {
        let st = self.state.lock();
        Self::graph(&st)
    }

    fn graph(st: &MwState) -> TopologyGraph {
        let mut g = TopologyGraph::new();
        for (id, ports) in &st.nodes {
            g.add_node(NodeRecord {
                id: id.clone(),
                technology: Technology::Mw,
                ports: ports.clone(),
            });
        }
        for l in st.links.values() {
            let cap = if l.quarantined { 0 } else { l.capacity_or_zero() };
            let used: Mbps = st.ledger[&l.id].values().sum();
            let mut te = TeAttributes::new(1, cap);
            te.unreserved_mbps = cap.saturating_sub(used);
            te.oper_up = l.oper_up;
            g.add_link(LinkRecord::new(l.id.clone(), LayerTag::MwAir, l.a.clone(), l.z.clone(), te));
        }
        g
    }

    pub fn compute_path(
        &self,
        from: &Identifier,
        to: &Identifier,
        mbps: Mbps,
        excludes: &BTreeSet<Identifier>,
    ) -> Result<Route, MwError> {
        let st = self.state.lock();
        cspf(&Self::graph(&st), LayerTag::MwAir, from, to, mbps, excludes).map_err(MwError::NoPath)
    }

    pub fn widest_from(&self, node: &Identifier) -> Option<Mbps> {
        let st = self.state.lock();
        widest_from(&Self::graph(&st), LayerTag::MwAir, node)
    }

    /// Phase one: books bandwidth along the path and opens configuration
    /// sessions on the segment's end devices.
    pub fn reserve(
        &self,
        from: &Identifier,
        to: &Identifier,
        mbps: Mbps,
        excludes: &BTreeSet<Identifier>,
    ) -> Result<Identifier, MwError> {
        let mut st = self.state.lock();
        let route = cspf(&Self::graph(&st), LayerTag::MwAir, from, to, mbps, excludes).map_err(MwError::NoPath)?;
        let n = st.next_alloc;
        st.next_alloc += 1;
        let id = Identifier::new(st.domain.clone(), format!("alloc-{n}")).expect("valid id");
        let mut txn = ConfigTxn::default();
        let mut ends = vec![from.clone()];
        if to != from {
            ends.push(to.clone());
        }
        for dev in &ends {
            if let Err(e) = txn.stage(&self.sbi, dev, &[]) {
                txn.abort(&self.sbi);
                st.allocations.insert(
                    n,
                    MwAllocation {
                        id,
                        links: route.links,
                        nodes: route.nodes,
                        reserved_mbps: mbps,
                        state: ServiceState::Failed,
                    },
                );
                return Err(MwError::CommitFailed(e));
            }
        }
        for l in &route.links {
            st.ledger.get_mut(l).expect("route links exist").insert(id.clone(), mbps);
        }
        st.allocations.insert(
            n,
            MwAllocation {
                id: id.clone(),
                links: route.links,
                nodes: route.nodes,
                reserved_mbps: mbps,
                state: ServiceState::Reserved,
            },
        );
        st.pending.insert(n, Pending { txn });
        Ok(id)
    }

    fn alloc_key(id: &Identifier) -> Result<u64, MwError> {
        id.local()
            .strip_prefix("alloc-")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MwError::UnknownAllocation(id.clone()))
    }

    fn release_ledger(st: &mut MwState, alloc: &MwAllocation) {
        for l in &alloc.links {
            if let Some(entries) = st.ledger.get_mut(l) {
                entries.remove(&alloc.id);
            }
        }
    }

    /// Phase two. On failure the reservation is released.
    pub fn commit(&self, id: &Identifier) -> Result<(), MwError> {
        let key = Self::alloc_key(id)?;
        let mut st = self.state.lock();
        let alloc = st.allocations.get(&key).cloned().ok_or_else(|| MwError::UnknownAllocation(id.clone()))?;
        if alloc.state != ServiceState::Reserved {
            return Err(MwError::BadState {
                id: id.clone(),
                state: alloc.state,
            });
        }
        let pending = st.pending.remove(&key).expect("reserved allocations have a pending txn");
        let result = pending.txn.commit(&self.sbi);
        let a = st.allocations.get_mut(&key).expect("present");
        match result {
            Ok(_) => {
                a.state = ServiceState::Active;
                Ok(())
            }
            Err(e) => {
                a.state = ServiceState::Failed;
                Self::release_ledger(&mut st, &alloc);
                Err(MwError::CommitFailed(e))
            }
        }
    }

    /// Undoes a reserved or active allocation.
    pub fn rollback(&self, id: &Identifier) -> Result<(), MwError> {
        let key = Self::alloc_key(id)?;
        let mut st = self.state.lock();
        let alloc = st.allocations.get(&key).cloned().ok_or_else(|| MwError::UnknownAllocation(id.clone()))?;
        let next = match alloc.state {
            ServiceState::Reserved => {
                if let Some(p) = st.pending.remove(&key) {
                    p.txn.abort(&self.sbi);
                }
                ServiceState::Failed
            }
            ServiceState::Active => ServiceState::Deleted,
            _ => return Ok(()),
        };
        Self::release_ledger(&mut st, &alloc);
        st.allocations.get_mut(&key).expect("present").state = next;
        Ok(())
    }

    pub fn release(&self, id: &Identifier) -> Result<(), MwError> {
        let key = Self::alloc_key(id)?;
        let mut st = self.state.lock();
        let alloc = st.allocations.get(&key).cloned().ok_or_else(|| MwError::UnknownAllocation(id.clone()))?;
        if alloc.state != ServiceState::Active {
            return Err(MwError::BadState {
                id: id.clone(),
                state: alloc.state,
            });
        }
        Self::release_ledger(&mut st, &alloc);
        st.allocations.get_mut(&key).expect("present").state = ServiceState::Deleted;
        Ok(())
    }

    pub fn allocation(&self, id: &Identifier) -> Result<MwAllocation, MwError> {
        let key = Self::alloc_key(id)?;
        self.state
            .lock()
            .allocations
            .get(&key)
            .cloned()
            .ok_or_else(|| MwError::UnknownAllocation(id.clone()))
    }

    pub fn allocations(&self) -> Vec<MwAllocation> {
        self.state.lock().allocations.values().cloned().collect()
    }

    /// Σ allocations on a link.
    pub fn allocated_on(&self, link: &Identifier) -> Mbps {
        self.state
            .lock()
            .ledger
            .get(link)
            .map(|e| e.values().sum())
            .unwrap_or(0)
    }

    /// Allocation bound and ledger/record consistency.
    pub fn audit(&self) -> Vec<String> {
        let st = self.state.lock();
        let mut out = Vec::new();
        for l in st.links.values() {
            let used: Mbps = st.ledger[&l.id].values().sum();
            let cap = l.capacity_or_zero();
            if used > cap {
                out.push(format!("mw link {}: allocations {used} exceed capacity {cap}", l.id));
            }
        }
        for a in st.allocations.values() {
            for l in &a.links {
                let booked = st.ledger.get(l).and_then(|e| e.get(&a.id));
                match (a.state.holds_resources(), booked) {
                    (true, Some(m)) if *m == a.reserved_mbps => {}
                    (false, None) => {}
                    _ => out.push(format!("mw allocation {} inconsistent on {l}", a.id)),
                }
            }
        }
        for (l, entries) in &st.ledger {
            for holder in entries.keys() {
                let live = Self::alloc_key(holder)
                    .ok()
                    .and_then(|k| st.allocations.get(&k))
                    .is_some_and(|a| a.state.holds_resources() && a.links.contains(l));
                if !live {
                    out.push(format!("mw link {l}: orphan reservation {holder}"));
                }
            }
        }
        out
    }

    pub fn ledger_snapshot(&self) -> serde_json::Value {
        let st = self.state.lock();
        serde_json::json!({
            "links": st.links.values().map(|l| serde_json::json!({
                "id": l.id,
                "config": l.config,
                "current_modulation": l.current_modulation,
                "oper_up": l.oper_up,
            })).collect::<Vec<_>>(),
            "ledger": st.ledger,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_formula_examples() {
        assert_eq!(capacity_mbps(56, Modulation::Qam256), 403);
        assert_eq!(capacity_mbps(56, Modulation::Qpsk), 100);
        assert_eq!(capacity_mbps(112, Modulation::Qam1024), 1008);
    }

    #[test]
    fn capacity_strictly_increases_with_order() {
        for bw in CHANNEL_BANDWIDTHS_MHZ {
            for w in Modulation::ALL.windows(2) {
                assert!(capacity_mbps(bw, w[0]) < capacity_mbps(bw, w[1]), "{bw} {:?}", w);
            }
        }
    }

    #[test]
    fn config_checks() {
        let mut c = AirInterfaceConfig {
            channel_bandwidth_mhz: 56,
            modulation_min: Modulation::Qpsk,
            modulation_max: Modulation::Qam256,
            adaptive: true,
            tx_power_dbm: 15,
            tx_frequency_khz: 18_000_000,
        };
        assert!(c.check().is_ok());
        c.adaptive = false;
        assert!(c.check().is_err());
        c.adaptive = true;
        c.modulation_min = Modulation::Qam1024;
        assert!(c.check().is_err());
        c.modulation_min = Modulation::Qpsk;
        c.channel_bandwidth_mhz = 13;
        assert!(c.check().is_err());
    }

    #[test]
    fn modulation_names_round_trip() {
        for m in Modulation::ALL {
            assert_eq!(m.as_str().parse::<Modulation>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), serde_json::json!(m.as_str()));
        }
        assert_eq!(Modulation::Qam256.bits_per_symbol(), 8);
    }
}

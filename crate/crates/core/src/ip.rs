// SPDX-License-Identifier: Apache-2.0

//! IP/MPLS domain controller: inventory and layered topology discovery,
//! CSPF-routed RSVP-TE style LSPs with a bandwidth ledger, and L2/L3 VPNs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::config::{ConfigTree, Edit, LeafValue};
use crate::device::DeviceDescriptor;
use crate::model::{Identifier, LayerTag, LinkRecord, Mbps, NodeRecord, ServiceState, TeAttributes, Technology, TopologyGraph};
use crate::path::{cspf, widest_from, NoPathReason, PathError, Route};
use crate::sbi::{ConfigTxn, SbiError, Southbound};

pub const MAX_VPN_TAG: u32 = 4094;

/// A router-to-router adjacency as declared in the topology file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    pub id: Identifier,
    pub a: Identifier,
    pub z: Identifier,
    pub te_metric: u32,
    pub capacity_mbps: Mbps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceInfo {
    pub name: String,
    pub admin_up: bool,
    pub oper_up: bool,
    pub mpls: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vlan: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peer: Option<Identifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterInfo {
    pub descriptor: DeviceDescriptor,
    pub reachable: bool,
    pub interfaces: Vec<InterfaceInfo>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpInventory {
    pub routers: Vec<RouterInfo>,
    /// Devices that could not be read during the last discovery.
    pub errors: BTreeMap<Identifier, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayeredTopology {
    pub eth_l2: TopologyGraph,
    pub ip_l3: TopologyGraph,
    pub mpls: TopologyGraph,
}

impl LayeredTopology {
    pub fn layer(&self, layer: LayerTag) -> Option<&TopologyGraph> {
        match layer {
            LayerTag::EthL2 => Some(&self.eth_l2),
            LayerTag::IpL3 => Some(&self.ip_l3),
            LayerTag::Mpls => Some(&self.mpls),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lsp {
    pub id: Identifier,
    pub head: Identifier,
    pub tail: Identifier,
    pub ero: Vec<Identifier>,
    pub reserved_mbps: Mbps,
    pub state: ServiceState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VpnKind {
    L2,
    L3,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VpnService {
    pub id: Identifier,
    pub kind: VpnKind,
    pub tag: u32,
    pub attachments: Vec<Identifier>,
    pub requested_mbps: Mbps,
    pub state: ServiceState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkUsage {
    pub link: Identifier,
    pub capacity_mbps: Mbps,
    pub reserved_mbps: Mbps,
    pub unreserved_mbps: Mbps,
    pub tx_mbps: Mbps,
    pub stale: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpMonitoring {
    pub links: Vec<LinkUsage>,
    pub lsps: Vec<Lsp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IpError {
    #[error("no path ({0:?})")]
    NoPath(NoPathReason),
    #[error("unknown node {0}")]
    UnknownNode(Identifier),
    #[error("unknown LSP {0}")]
    UnknownLsp(Identifier),
    #[error("unknown VPN {0}")]
    UnknownVpn(Identifier),
    #[error("{id} is {state}")]
    BadState { id: Identifier, state: ServiceState },
    #[error("commit failed: {0}")]
    CommitFailed(SbiError),
    #[error("VPN tag space exhausted")]
    TagExhausted,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl From<PathError> for IpError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::NoPath(r) => IpError::NoPath(r),
            PathError::UnknownNode(n) => IpError::UnknownNode(n),
        }
    }
}

/// Bandwidth bookkeeping for one IP_L3 link. `unreserved` is maintained
/// separately from the reservation map so the audit can compare the two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkLedger {
    pub capacity_mbps: Mbps,
    pub unreserved_mbps: Mbps,
    pub reservations: BTreeMap<Identifier, Mbps>,
}

struct IpState {
    domain: String,
    routers: BTreeMap<Identifier, BTreeSet<Identifier>>,
    adjacencies: BTreeMap<Identifier, Adjacency>,
    ledger: BTreeMap<Identifier, LinkLedger>,
    inventory: IpInventory,
    topology: LayeredTopology,
    lsps: BTreeMap<u64, Lsp>,
    pending: BTreeMap<u64, ConfigTxn>,
    next_lsp: u64,
    vpns: BTreeMap<u64, VpnService>,
    next_vpn: u64,
    max_tag: u32,
}

pub struct IpController {
    sbi: Arc<Southbound>,
    state: Mutex<IpState>,
}

fn lsp_key(id: &Identifier) -> Option<u64> {
    id.local().strip_prefix("lsp-")?.parse().ok()
}

fn vpn_key(id: &Identifier) -> Option<u64> {
    id.local().strip_prefix("vpn-")?.parse().ok()
}

impl IpController {
    pub fn new(sbi: Arc<Southbound>, domain: &str) -> Self {
        Self {
            sbi,
            state: Mutex::new(IpState {
                domain: domain.to_string(),
                routers: BTreeMap::new(),
                adjacencies: BTreeMap::new(),
                ledger: BTreeMap::new(),
                inventory: IpInventory::default(),
                topology: LayeredTopology::default(),
                lsps: BTreeMap::new(),
                pending: BTreeMap::new(),
                next_lsp: 1,
                vpns: BTreeMap::new(),
                next_vpn: 1,
                max_tag: MAX_VPN_TAG,
            }),
        }
    }

    pub fn domain(&self) -> String {
        self.state.lock().domain.clone()
    }

    /// Narrows the VPN tag space. Used to exercise exhaustion.
    pub fn set_max_tag(&self, max: u32) {
        self.state.lock().max_tag = max.clamp(1, MAX_VPN_TAG);
    }

    pub fn onboard(&self, routers: Vec<NodeRecord>, adjacencies: Vec<Adjacency>) {
        {
            let mut st = self.state.lock();
            for r in routers {
                st.routers.insert(r.id, r.ports);
            }
            for a in adjacencies {
                st.ledger.insert(
                    a.id.clone(),
                    LinkLedger {
                        capacity_mbps: a.capacity_mbps,
                        unreserved_mbps: a.capacity_mbps,
                        reservations: BTreeMap::new(),
                    },
                );
                st.adjacencies.insert(a.id.clone(), a);
            }
        }
        self.discover();
    }

    /// Rebuilds inventory and the layered topology from device state.
    /// Unreachable routers are reported per device; their links go down.
    pub fn discover(&self) -> IpInventory {
        let mut st = self.state.lock();
        let mut inventory = IpInventory::default();
        let mut configs: BTreeMap<Identifier, (ConfigTree, BTreeMap<String, bool>)> = BTreeMap::new();
        for dev in st.routers.keys() {
            let descriptor = match self.sbi.plane().descriptor(dev) {
                Ok(d) => d,
                Err(e) => {
                    inventory.errors.insert(dev.clone(), e.to_string());
                    continue;
                }
            };
            let read = self.sbi.running(dev).and_then(|cfg| {
                let counters = self.sbi.plane().counters(dev)?;
                Ok((cfg, counters))
            });
            let (cfg, counters) = match read {
                Ok(x) => x,
                Err(e) => {
                    inventory.errors.insert(dev.clone(), e.to_string());
                    inventory.routers.push(RouterInfo {
                        descriptor,
                        reachable: false,
                        interfaces: Vec::new(),
                    });
                    continue;
                }
            };
            let oper: BTreeMap<String, bool> = counters.interfaces.iter().map(|(k, v)| (k.clone(), v.oper_up)).collect();
            let interfaces = cfg
                .children("/interfaces")
                .into_iter()
                .map(|name| {
                    let leaf = |l: &str| cfg.get(&format!("/interfaces/{name}/{l}"));
                    let port = dev.port(&name);
                    InterfaceInfo {
                        admin_up: leaf("admin_up").and_then(LeafValue::as_bool).unwrap_or(false),
                        oper_up: oper.get(&name).copied().unwrap_or(true),
                        mpls: leaf("mpls").and_then(LeafValue::as_bool).unwrap_or(false),
                        vlan: leaf("vlan").and_then(LeafValue::as_int),
                        peer: st.adjacencies.values().find_map(|a| {
                            if a.a == port {
                                Some(a.z.clone())
                            } else if a.z == port {
                                Some(a.a.clone())
                            } else {
                                None
                            }
                        }),
                        name,
                    }
                })
                .collect();
            inventory.routers.push(RouterInfo {
                descriptor,
                reachable: true,
                interfaces,
            });
            configs.insert(dev.clone(), (cfg, oper));
        }

        let mut topo = LayeredTopology::default();
        for (id, ports) in &st.routers {
            let node = NodeRecord {
                id: id.clone(),
                technology: Technology::Ip,
                ports: ports.clone(),
            };
            topo.eth_l2.add_node(node.clone());
            topo.ip_l3.add_node(node.clone());
            topo.mpls.add_node(node);
        }
        for adj in st.adjacencies.values() {
            let end = |p: &Identifier| -> Option<(bool, bool, bool)> {
                let (cfg, oper) = configs.get(&p.node())?;
                let name = p.port_name()?;
                let admin = cfg.get(&format!("/interfaces/{name}/admin_up"))?.as_bool()?;
                let mpls = cfg
                    .get(&format!("/interfaces/{name}/mpls"))
                    .and_then(LeafValue::as_bool)
                    .unwrap_or(false);
                Some((admin, oper.get(name).copied().unwrap_or(true), mpls))
            };
            let readable = |p: &Identifier| configs.contains_key(&p.node());
            let (a_admin, a_oper, a_mpls, z_admin, z_oper, z_mpls) = match (end(&adj.a), end(&adj.z)) {
                (Some(a), Some(z)) => (a.0, a.1, a.2, z.0, z.1, z.2),
                // interface not configured on a reachable router: no adjacency
                _ if readable(&adj.a) && readable(&adj.z) => continue,
                // an end could not be read: keep the link, operationally down
                _ => (true, false, false, true, false, false),
            };
            let ledger = &st.ledger[&adj.id];
            let mk = |suffix: &str, layer: LayerTag, metric: u32| {
                let id = if suffix.is_empty() {
                    adj.id.clone()
                } else {
                    Identifier::new(adj.id.domain(), format!("{}.{suffix}", adj.id.local())).expect("valid id")
                };
                let mut te = TeAttributes::new(metric, adj.capacity_mbps);
                te.unreserved_mbps = ledger.unreserved_mbps;
                te.admin_up = a_admin && z_admin;
                te.oper_up = a_oper && z_oper;
                LinkRecord::new(id, layer, adj.a.clone(), adj.z.clone(), te)
            };
            let mut l2 = mk("eth", LayerTag::EthL2, 1);
            l2.te.unreserved_mbps = adj.capacity_mbps;
            topo.eth_l2.add_link(l2);
            topo.ip_l3.add_link(mk("", LayerTag::IpL3, adj.te_metric));
            if a_mpls && z_mpls {
                topo.mpls.add_link(mk("mpls", LayerTag::Mpls, adj.te_metric));
            }
        }
        topo.eth_l2.canonicalize();
        topo.ip_l3.canonicalize();
        topo.mpls.canonicalize();
        st.topology = topo;
        st.inventory = inventory.clone();
        inventory
    }

    pub fn inventory(&self) -> IpInventory {
        self.state.lock().inventory.clone()
    }

    pub fn topology(&self) -> LayeredTopology {
        self.state.lock().topology.clone()
    }

    pub fn stale_devices(&self) -> BTreeSet<Identifier> {
        self.state.lock().inventory.errors.keys().cloned().collect()
    }

    fn refresh_unreserved(st: &mut IpState) {
        let IpState { topology, ledger, .. } = st;
        for l in topology.ip_l3.links.iter_mut().chain(topology.mpls.links.iter_mut()) {
            let base = l.id.local().trim_end_matches(".mpls");
            if let Some(e) = ledger.get(&Identifier::new(l.id.domain(), base).expect("valid id")) {
                l.te.unreserved_mbps = e.unreserved_mbps;
            }
        }
    }

    pub fn compute_path(
        &self,
        head: &Identifier,
        tail: &Identifier,
        mbps: Mbps,
        excludes: &BTreeSet<Identifier>,
    ) -> Result<Route, IpError> {
        let st = self.state.lock();
        Ok(cspf(&st.topology.ip_l3, LayerTag::IpL3, head, tail, mbps, excludes)?)
    }

    pub fn widest_from(&self, node: &Identifier) -> Option<Mbps> {
        let st = self.state.lock();
        widest_from(&st.topology.ip_l3, LayerTag::IpL3, node)
    }

    fn lsp_edits(lsp: &Lsp) -> Vec<Edit> {
        let base = format!("/mpls/lsp/{}", lsp.id.local());
        let ero: Vec<String> = lsp.ero.iter().map(Identifier::render).collect();
        vec![
            Edit::set(format!("{base}/bandwidth_mbps"), lsp.reserved_mbps as i64),
            Edit::set(format!("{base}/ero"), ero.join(",")),
            Edit::set(format!("{base}/tail"), lsp.tail.render()),
        ]
    }

    fn book(st: &mut IpState, lsp: &Lsp) {
        for l in &lsp.ero {
            let e = st.ledger.get_mut(l).expect("ero links are in the ledger");
            e.unreserved_mbps -= lsp.reserved_mbps;
            e.reservations.insert(lsp.id.clone(), lsp.reserved_mbps);
        }
        Self::refresh_unreserved(st);
    }

    fn unbook(st: &mut IpState, lsp: &Lsp) {
        for l in &lsp.ero {
            if let Some(e) = st.ledger.get_mut(l) {
                if e.reservations.remove(&lsp.id).is_some() {
                    e.unreserved_mbps += lsp.reserved_mbps;
                }
            }
        }
        Self::refresh_unreserved(st);
    }

    /// Phase one: computes the path, books bandwidth and stages the head-end
    /// configuration. The head-end session stays open until commit.
    pub fn reserve_lsp(
        &self,
        head: &Identifier,
        tail: &Identifier,
        mbps: Mbps,
        excludes: &BTreeSet<Identifier>,
    ) -> Result<Identifier, IpError> {
        if mbps == 0 {
            return Err(IpError::InvalidRequest("bandwidth must be positive".into()));
        }
        let mut st = self.state.lock();
        let route = cspf(&st.topology.ip_l3, LayerTag::IpL3, head, tail, mbps, excludes)?;
        let n = st.next_lsp;
        st.next_lsp += 1;
        let mut lsp = Lsp {
            id: Identifier::new(st.domain.clone(), format!("lsp-{n}")).expect("valid id"),
            head: head.clone(),
            tail: tail.clone(),
            ero: route.links,
            reserved_mbps: mbps,
            state: ServiceState::Planned,
        };
        let mut txn = ConfigTxn::default();
        if let Err(e) = txn.stage(&self.sbi, head, &Self::lsp_edits(&lsp)) {
            txn.abort(&self.sbi);
            lsp.state = ServiceState::Failed;
            st.lsps.insert(n, lsp);
            return Err(IpError::CommitFailed(e));
        }
        Self::book(&mut st, &lsp);
        lsp.state = ServiceState::Reserved;
        let id = lsp.id.clone();
        st.lsps.insert(n, lsp);
        st.pending.insert(n, txn);
        Ok(id)
    }

    /// Phase two. On failure the reservation is released and the LSP fails.
    pub fn commit_lsp(&self, id: &Identifier) -> Result<Lsp, IpError> {
        let mut st = self.state.lock();
        let (n, lsp) = Self::find_lsp(&st, id)?;
        if lsp.state != ServiceState::Reserved {
            return Err(IpError::BadState {
                id: id.clone(),
                state: lsp.state,
            });
        }
        let txn = st.pending.remove(&n).expect("reserved LSPs have a staged txn");
        match txn.commit(&self.sbi) {
            Ok(_) => {
                let l = st.lsps.get_mut(&n).expect("present");
                l.state = ServiceState::Active;
                Ok(l.clone())
            }
            Err(e) => {
                Self::unbook(&mut st, &lsp);
                st.lsps.get_mut(&n).expect("present").state = ServiceState::Failed;
                Err(IpError::CommitFailed(e))
            }
        }
    }

    pub fn provision_lsp(
        &self,
        head: &Identifier,
        tail: &Identifier,
        mbps: Mbps,
        excludes: &BTreeSet<Identifier>,
    ) -> Result<Lsp, IpError> {
        let id = self.reserve_lsp(head, tail, mbps, excludes)?;
        self.commit_lsp(&id)
    }

    fn find_lsp(st: &IpState, id: &Identifier) -> Result<(u64, Lsp), IpError> {
        lsp_key(id)
            .filter(|_| id.domain() == st.domain)
            .and_then(|n| st.lsps.get(&n).map(|l| (n, l.clone())))
            .ok_or_else(|| IpError::UnknownLsp(id.clone()))
    }

    fn remove_head_config(&self, lsp: &Lsp) -> Result<(), IpError> {
        let base = format!("/mpls/lsp/{}", lsp.id.local());
        let deletes: Vec<Edit> = ["bandwidth_mbps", "ero", "tail"]
            .iter()
            .map(|l| Edit::delete(format!("{base}/{l}")))
            .collect();
        self.sbi.apply(&lsp.head, &deletes).map_err(IpError::CommitFailed)?;
        Ok(())
    }

    pub fn teardown_lsp(&self, id: &Identifier) -> Result<(), IpError> {
        let mut st = self.state.lock();
        let (n, lsp) = Self::find_lsp(&st, id)?;
        if lsp.state != ServiceState::Active {
            return Err(IpError::BadState {
                id: id.clone(),
                state: lsp.state,
            });
        }
        self.remove_head_config(&lsp)?;
        Self::unbook(&mut st, &lsp);
        st.lsps.get_mut(&n).expect("present").state = ServiceState::Deleted;
        Ok(())
    }

    /// Undoes a reserved or active LSP. Other states are left alone.
    pub fn rollback_lsp(&self, id: &Identifier) -> Result<(), IpError> {
        let mut st = self.state.lock();
        let (n, lsp) = Self::find_lsp(&st, id)?;
        let next = match lsp.state {
            ServiceState::Reserved => {
                if let Some(txn) = st.pending.remove(&n) {
                    txn.abort(&self.sbi);
                }
                ServiceState::Failed
            }
            ServiceState::Active => {
                self.remove_head_config(&lsp)?;
                ServiceState::Deleted
            }
            _ => return Ok(()),
        };
        Self::unbook(&mut st, &lsp);
        st.lsps.get_mut(&n).expect("present").state = next;
        Ok(())
    }

    pub fn lsp(&self, id: &Identifier) -> Result<Lsp, IpError> {
        Ok(Self::find_lsp(&self.state.lock(), id)?.1)
    }

    pub fn lsps(&self) -> Vec<Lsp> {
        self.state.lock().lsps.values().cloned().collect()
    }

    /// Adds a router-to-router link (e.g. one carried over an optical
    /// circuit), configures both interfaces and rediscovers.
    pub fn register_link(&self, adj: Adjacency) -> Result<Identifier, IpError> {
        {
            let st = self.state.lock();
            for p in [&adj.a, &adj.z] {
                if !st.routers.contains_key(&p.node()) {
                    return Err(IpError::UnknownNode(p.node()));
                }
            }
            if st.adjacencies.contains_key(&adj.id) {
                return Err(IpError::InvalidRequest(format!("link {} already exists", adj.id)));
            }
        }
        let mut txn = ConfigTxn::default();
        for p in [&adj.a, &adj.z] {
            let name = p.port_name().unwrap_or_default();
            let edits = [
                Edit::set(format!("/interfaces/{name}/admin_up"), true),
                Edit::set(format!("/interfaces/{name}/mpls"), true),
            ];
            if let Err(e) = txn.stage(&self.sbi, &p.node(), &edits) {
                txn.abort(&self.sbi);
                return Err(IpError::CommitFailed(e));
            }
        }
        txn.commit(&self.sbi).map_err(IpError::CommitFailed)?;
        let id = adj.id.clone();
        {
            let mut st = self.state.lock();
            for p in [&adj.a, &adj.z] {
                if let Some(ports) = st.routers.get_mut(&p.node()) {
                    ports.insert(p.clone());
                }
            }
            st.ledger.insert(
                adj.id.clone(),
                LinkLedger {
                    capacity_mbps: adj.capacity_mbps,
                    unreserved_mbps: adj.capacity_mbps,
                    reservations: BTreeMap::new(),
                },
            );
            st.adjacencies.insert(adj.id.clone(), adj);
        }
        self.discover();
        Ok(id)
    }

    pub fn adjacencies(&self) -> Vec<Adjacency> {
        self.state.lock().adjacencies.values().cloned().collect()
    }

    pub fn provision_vpn(&self, kind: VpnKind, attachments: &[Identifier], mbps: Mbps) -> Result<VpnService, IpError> {
        if attachments.len() < 2 {
            return Err(IpError::InvalidRequest("a VPN needs at least two attachments".into()));
        }
        let mut st = self.state.lock();
        for a in attachments {
            if !a.is_port() {
                return Err(IpError::InvalidRequest(format!("{a} is not an interface")));
            }
            if !st.routers.contains_key(&a.node()) {
                return Err(IpError::UnknownNode(a.node()));
            }
        }
        let used: BTreeSet<u32> = st
            .vpns
            .values()
            .filter(|v| v.kind == kind && v.state.holds_resources())
            .map(|v| v.tag)
            .collect();
        let tag = (1..=st.max_tag).find(|t| !used.contains(t)).ok_or(IpError::TagExhausted)?;
        let n = st.next_vpn;
        st.next_vpn += 1;
        let id = Identifier::new(st.domain.clone(), format!("vpn-{n}")).expect("valid id");
        let mut per_pe: BTreeMap<Identifier, Vec<Edit>> = BTreeMap::new();
        for a in attachments {
            let name = a.port_name().expect("checked above");
            let root = match kind {
                VpnKind::L3 => format!("/vrf/vpn{tag}"),
                VpnKind::L2 => format!("/virtual-switch/vpn{tag}"),
            };
            let edits = per_pe.entry(a.node()).or_default();
            if edits.is_empty() {
                edits.push(Edit::set(format!("{root}/vpn_tag"), i64::from(tag)));
                edits.push(Edit::set(format!("{root}/bandwidth_mbps"), mbps as i64));
            }
            edits.push(Edit::set(format!("{root}/interfaces/{name}/vlan"), i64::from(tag)));
            edits.push(Edit::set(format!("/interfaces/{name}/vlan"), i64::from(tag)));
        }
        let mut txn = ConfigTxn::default();
        let mut vpn = VpnService {
            id,
            kind,
            tag,
            attachments: attachments.to_vec(),
            requested_mbps: mbps,
            state: ServiceState::Planned,
        };
        for (pe, edits) in &per_pe {
            if let Err(e) = txn.stage(&self.sbi, pe, edits) {
                txn.abort(&self.sbi);
                vpn.state = ServiceState::Failed;
                st.vpns.insert(n, vpn);
                return Err(IpError::CommitFailed(e));
            }
        }
        vpn.state = ServiceState::Reserved;
        match txn.commit(&self.sbi) {
            Ok(_) => {
                vpn.state = ServiceState::Active;
                st.vpns.insert(n, vpn.clone());
                Ok(vpn)
            }
            Err(e) => {
                vpn.state = ServiceState::Failed;
                st.vpns.insert(n, vpn);
                Err(IpError::CommitFailed(e))
            }
        }
    }

    pub fn teardown_vpn(&self, id: &Identifier) -> Result<(), IpError> {
        let mut st = self.state.lock();
        let n = vpn_key(id)
            .filter(|n| st.vpns.contains_key(n))
            .ok_or_else(|| IpError::UnknownVpn(id.clone()))?;
        let vpn = st.vpns[&n].clone();
        if vpn.state != ServiceState::Active {
            return Err(IpError::BadState {
                id: id.clone(),
                state: vpn.state,
            });
        }
        let root = match vpn.kind {
            VpnKind::L3 => format!("/vrf/vpn{}", vpn.tag),
            VpnKind::L2 => format!("/virtual-switch/vpn{}", vpn.tag),
        };
        let mut txn = ConfigTxn::default();
        let pes: BTreeSet<Identifier> = vpn.attachments.iter().map(Identifier::node).collect();
        for pe in pes {
            let tree = self.sbi.running(&pe).map_err(IpError::CommitFailed)?;
            let mut edits: Vec<Edit> = tree
                .subtree(&root)
                .map(|(p, _)| Edit::delete(p.clone()))
                .collect();
            for a in vpn.attachments.iter().filter(|a| a.node() == pe) {
                edits.push(Edit::delete(format!("/interfaces/{}/vlan", a.port_name().unwrap_or_default())));
            }
            if let Err(e) = txn.stage(&self.sbi, &pe, &edits) {
                txn.abort(&self.sbi);
                return Err(IpError::CommitFailed(e));
            }
        }
        txn.commit(&self.sbi).map_err(IpError::CommitFailed)?;
        st.vpns.get_mut(&n).expect("present").state = ServiceState::Deleted;
        Ok(())
    }

    pub fn vpns(&self) -> Vec<VpnService> {
        self.state.lock().vpns.values().cloned().collect()
    }

    pub fn monitoring(&self) -> IpMonitoring {
        let st = self.state.lock();
        let links = st
            .adjacencies
            .values()
            .map(|adj| {
                let e = &st.ledger[&adj.id];
                let counters = self.sbi.plane().counters(&adj.a.node());
                let stale = counters.is_err() || self.sbi.plane().counters(&adj.z.node()).is_err();
                let tx = counters
                    .ok()
                    .and_then(|c| c.interfaces.get(adj.a.port_name().unwrap_or_default()).map(|i| i.tx_mbps))
                    .unwrap_or(0);
                LinkUsage {
                    link: adj.id.clone(),
                    capacity_mbps: e.capacity_mbps,
                    reserved_mbps: e.reservations.values().sum(),
                    unreserved_mbps: e.unreserved_mbps,
                    tx_mbps: tx,
                    stale,
                }
            })
            .collect();
        IpMonitoring {
            links,
            lsps: st.lsps.values().filter(|l| l.state.holds_resources()).cloned().collect(),
        }
    }

    /// Ledger conservation and LSP/ledger agreement.
    pub fn audit(&self) -> Vec<String> {
        let st = self.state.lock();
        let mut out = Vec::new();
        for (link, e) in &st.ledger {
            let reserved: Mbps = e.reservations.values().sum();
            if e.unreserved_mbps + reserved != e.capacity_mbps {
                out.push(format!(
                    "ip link {link}: unreserved {} + reserved {reserved} != capacity {}",
                    e.unreserved_mbps, e.capacity_mbps
                ));
            }
            for holder in e.reservations.keys() {
                let live = lsp_key(holder)
                    .and_then(|n| st.lsps.get(&n))
                    .is_some_and(|l| l.state.holds_resources() && l.ero.contains(link));
                if !live {
                    out.push(format!("ip link {link}: orphan reservation {holder}"));
                }
            }
        }
        for l in st.lsps.values().filter(|l| l.state.holds_resources()) {
            for link in &l.ero {
                if st.ledger.get(link).and_then(|e| e.reservations.get(&l.id)) != Some(&l.reserved_mbps) {
                    out.push(format!("ip {}: missing reservation on {link}", l.id));
                }
            }
        }
        out
    }

    pub fn ledger_snapshot(&self) -> serde_json::Value {
        let st = self.state.lock();
        serde_json::json!({ "links": st.ledger })
    }
}

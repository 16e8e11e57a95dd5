// SPDX-License-Identifier: Apache-2.0

//! Optical domain controller: ROADM/fiber topology, OCh routing with
//! first-fit wavelength assignment, ODU grooming and a T-API shaped view.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::config::Edit;
use crate::model::{Identifier, LayerTag, LinkRecord, Mbps, NodeRecord, ServiceState, TeAttributes, Technology, TopologyGraph};
use crate::path::{for_each_ordered_path, EdgeList, Route};
use crate::sbi::{AppliedChanges, ConfigTxn, SbiError, Southbound};

pub const OCH_CAPACITY_MBPS: Mbps = 100_000;

/// Graphs above this many ROADMs get a bounded path enumeration.
pub const PATH_CAP_THRESHOLD: usize = 16;
pub const DEFAULT_PATH_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OduRate {
    Odu0,
    Odu2,
    Odu4,
}

impl OduRate {
    pub const ALL: [OduRate; 3] = [OduRate::Odu0, OduRate::Odu2, OduRate::Odu4];

    pub fn mbps(self) -> Mbps {
        match self {
            OduRate::Odu0 => 1_250,
            OduRate::Odu2 => 10_000,
            OduRate::Odu4 => 100_000,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OduRate::Odu0 => "ODU0",
            OduRate::Odu2 => "ODU2",
            OduRate::Odu4 => "ODU4",
        }
    }
}

/// One fiber as seen by the wavelength assignment: end nodes and the
/// occupied flag of each slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RwaFiber {
    pub id: Identifier,
    pub a: Identifier,
    pub z: Identifier,
    pub occupied: Vec<bool>,
}

/// Hop-count routing with first-fit λ: walks candidate paths in order and
/// returns the first that has a slot free on every fiber, with the lowest
/// such slot.
pub fn first_fit(
    fibers: &[RwaFiber],
    src: &Identifier,
    dst: &Identifier,
    excludes: &BTreeSet<Identifier>,
    cap: Option<usize>,
) -> Option<(Route, u32)> {
    let mut edges = EdgeList::default();
    for f in fibers {
        if !excludes.contains(&f.id) && !excludes.contains(&f.a) && !excludes.contains(&f.z) {
            edges.push(f.id.clone(), f.a.clone(), f.z.clone());
        }
    }
    let by_id: BTreeMap<&Identifier, &RwaFiber> = fibers.iter().map(|f| (&f.id, f)).collect();
    let mut found = None;
    for_each_ordered_path(&edges, src, dst, cap, |route| {
        let width = route.links.iter().map(|l| by_id[l].occupied.len()).min().unwrap_or(0);
        let lambda = (0..width).find(|&w| route.links.iter().all(|l| !by_id[l].occupied[w]));
        match lambda {
            Some(w) => {
                found = Some((route.clone(), w as u32));
                ControlFlow::Break(())
            }
            None => ControlFlow::Continue(()),
        }
    });
    found
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberDecl {
    pub id: Identifier,
    /// Degree ports at each end.
    pub a: Identifier,
    pub z: Identifier,
    pub wavelengths: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OchConnection {
    pub id: Identifier,
    /// Add/drop ports.
    pub a: Identifier,
    pub z: Identifier,
    pub nodes: Vec<Identifier>,
    pub path: Vec<Identifier>,
    pub lambda: u32,
    pub capacity_mbps: Mbps,
    pub allocated_mbps: Mbps,
    pub state: ServiceState,
    /// Created implicitly to carry an ODU; released with its last ODU.
    pub implicit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OduService {
    pub id: Identifier,
    pub rate: OduRate,
    pub a: Identifier,
    pub z: Identifier,
    pub carrier: Identifier,
    pub state: ServiceState,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpticalError {
    #[error("blocked: no path/wavelength available")]
    Blocked,
    #[error("unknown port {0}")]
    UnknownPort(Identifier),
    #[error("unknown OCh {0}")]
    UnknownOch(Identifier),
    #[error("unknown ODU {0}")]
    UnknownOdu(Identifier),
    #[error("OCh {0} carries ODUs")]
    OchInUse(Identifier),
    #[error("{id} is {state}")]
    BadState { id: Identifier, state: ServiceState },
    #[error("commit failed: {0}")]
    CommitFailed(SbiError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberUsage {
    pub fiber: Identifier,
    pub total_slots: u32,
    pub used_slots: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OchUsage {
    pub och: Identifier,
    pub allocated_mbps: Mbps,
    pub capacity_mbps: Mbps,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpticalMonitoring {
    pub fibers: Vec<FiberUsage>,
    pub ochs: Vec<OchUsage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapiNode {
    pub uuid: Identifier,
    pub owned_node_edge_points: Vec<Identifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapiLink {
    pub uuid: Identifier,
    pub node_edge_points: [Identifier; 2],
    pub layer_protocol: LayerTag,
    pub total_slots: u32,
    pub free_slots: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapiTopology {
    pub nodes: Vec<TapiNode>,
    pub links: Vec<TapiLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityService {
    pub uuid: Identifier,
    pub layer_protocol: LayerTag,
    pub end_points: [Identifier; 2],
    pub state: ServiceState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<OduRate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier: Option<Identifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapiContext {
    pub topology: TapiTopology,
    pub connectivity_services: Vec<ConnectivityService>,
    pub service_interface_points: Vec<Identifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapiView {
    pub context: TapiContext,
}

struct Fiber {
    decl: FiberDecl,
    slots: Vec<Option<Identifier>>,
}

struct PendingOdu {
    txn: ConfigTxn,
    new_och: Option<u64>,
}

struct OpticalState {
    domain: String,
    roadms: BTreeMap<Identifier, BTreeSet<Identifier>>,
    add_drops: BTreeSet<Identifier>,
    fibers: BTreeMap<Identifier, Fiber>,
    ochs: BTreeMap<u64, OchConnection>,
    odus: BTreeMap<u64, OduService>,
    pending: BTreeMap<u64, PendingOdu>,
    next_och: u64,
    next_odu: u64,
    path_cap: Option<usize>,
}

pub struct OpticalController {
    sbi: Arc<Southbound>,
    state: Mutex<OpticalState>,
}

fn numbered(id: &Identifier, prefix: &str) -> Option<u64> {
    id.local().strip_prefix(prefix)?.parse().ok()
}

impl OpticalState {
    fn rwa_fibers(&self) -> Vec<RwaFiber> {
        self.fibers
            .values()
            .map(|f| RwaFiber {
                id: f.decl.id.clone(),
                a: f.decl.a.node(),
                z: f.decl.z.node(),
                occupied: f.slots.iter().map(Option::is_some).collect(),
            })
            .collect()
    }

    fn cap(&self) -> Option<usize> {
        if self.roadms.len() > PATH_CAP_THRESHOLD {
            self.path_cap
        } else {
            None
        }
    }

    fn check_add_drop(&self, p: &Identifier) -> Result<(), OpticalError> {
        if self.add_drops.contains(p) {
            Ok(())
        } else {
            Err(OpticalError::UnknownPort(p.clone()))
        }
    }

    fn compute(&self, a: &Identifier, z: &Identifier, excludes: &BTreeSet<Identifier>) -> Result<(Route, u32), OpticalError> {
        self.check_add_drop(a)?;
        self.check_add_drop(z)?;
        if a.node() == z.node() {
            return Err(OpticalError::InvalidRequest("endpoints on the same ROADM".into()));
        }
        first_fit(&self.rwa_fibers(), &a.node(), &z.node(), excludes, self.cap()).ok_or(OpticalError::Blocked)
    }

    fn och_key(&self, id: &Identifier) -> Result<u64, OpticalError> {
        numbered(id, "och-")
            .filter(|n| id.domain() == self.domain && self.ochs.contains_key(n))
            .ok_or_else(|| OpticalError::UnknownOch(id.clone()))
    }

    fn odu_key(&self, id: &Identifier) -> Result<u64, OpticalError> {
        numbered(id, "odu-")
            .filter(|n| id.domain() == self.domain && self.odus.contains_key(n))
            .ok_or_else(|| OpticalError::UnknownOdu(id.clone()))
    }

    fn occupy(&mut self, och: &OchConnection) {
        for f in &och.path {
            self.fibers.get_mut(f).expect("path fibers exist").slots[och.lambda as usize] = Some(och.id.clone());
        }
    }

    fn vacate(&mut self, och: &OchConnection) {
        for f in &och.path {
            let slot = &mut self.fibers.get_mut(f).expect("path fibers exist").slots[och.lambda as usize];
            if slot.as_ref() == Some(&och.id) {
                *slot = None;
            }
        }
    }

    /// The degree port at `node` of `fiber`.
    fn degree_at(&self, fiber: &Identifier, node: &Identifier) -> String {
        let d = &self.fibers[fiber].decl;
        let p = if &d.a.node() == node { &d.a } else { &d.z };
        p.port_name().unwrap_or_default().to_string()
    }

    /// Cross-connect entries per ROADM along the OCh.
    fn cross_connects(&self, och: &OchConnection) -> Vec<(Identifier, Vec<Edit>)> {
        let last = och.nodes.len() - 1;
        och.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let in_port = if i == 0 {
                    och.a.port_name().unwrap_or_default().to_string()
                } else {
                    self.degree_at(&och.path[i - 1], n)
                };
                let out_port = if i == last {
                    och.z.port_name().unwrap_or_default().to_string()
                } else {
                    self.degree_at(&och.path[i], n)
                };
                let base = format!("/cross-connects/{}", och.id.local());
                (
                    n.clone(),
                    vec![
                        Edit::set(format!("{base}/in_port"), in_port),
                        Edit::set(format!("{base}/lambda"), i64::from(och.lambda)),
                        Edit::set(format!("{base}/out_port"), out_port),
                    ],
                )
            })
            .collect()
    }

    fn odu_clients(odu: &OduService) -> Vec<(Identifier, Vec<Edit>)> {
        [&odu.a, &odu.z]
            .into_iter()
            .map(|p| {
                let base = format!("/odu-clients/{}", odu.id.local());
                (
                    p.node(),
                    vec![
                        Edit::set(format!("{base}/och"), odu.carrier.render()),
                        Edit::set(format!("{base}/port"), p.port_name().unwrap_or_default()),
                        Edit::set(format!("{base}/rate"), odu.rate.as_str()),
                    ],
                )
            })
            .collect()
    }
}

fn deletes(entries: Vec<(Identifier, Vec<Edit>)>) -> Vec<(Identifier, Vec<Edit>)> {
    entries
        .into_iter()
        .map(|(d, es)| (d, es.into_iter().map(|e| Edit::delete(e.path)).collect()))
        .collect()
}

impl OpticalController {
    pub fn new(sbi: Arc<Southbound>, domain: &str) -> Self {
        Self {
            sbi,
            state: Mutex::new(OpticalState {
                domain: domain.to_string(),
                roadms: BTreeMap::new(),
                add_drops: BTreeSet::new(),
                fibers: BTreeMap::new(),
                ochs: BTreeMap::new(),
                odus: BTreeMap::new(),
                pending: BTreeMap::new(),
                next_och: 1,
                next_odu: 1,
                path_cap: Some(DEFAULT_PATH_CAP),
            }),
        }
    }

    pub fn domain(&self) -> String {
        self.state.lock().domain.clone()
    }

    pub fn set_path_cap(&self, cap: Option<usize>) {
        self.state.lock().path_cap = cap;
    }

    /// Registers ROADMs (ports named `deg*` are degrees, `ad*` add/drop) and
    /// fibers.
    pub fn onboard(&self, roadms: Vec<NodeRecord>, fibers: Vec<FiberDecl>) {
        let mut st = self.state.lock();
        for r in roadms {
            for p in &r.ports {
                if p.port_name().is_some_and(|n| n.starts_with("ad")) {
                    st.add_drops.insert(p.clone());
                }
            }
            st.roadms.insert(r.id, r.ports);
        }
        for f in fibers {
            let slots = vec![None; f.wavelengths as usize];
            st.fibers.insert(f.id.clone(), Fiber { decl: f, slots });
        }
    }

    pub fn is_add_drop(&self, p: &Identifier) -> bool {
        self.state.lock().add_drops.contains(p)
    }

    pub fn compute_och(
        &self,
        a: &Identifier,
        z: &Identifier,
        excludes: &BTreeSet<Identifier>,
    ) -> Result<(Route, u32), OpticalError> {
        self.state.lock().compute(a, z, excludes)
    }

    fn apply_all(&self, entries: &[(Identifier, Vec<Edit>)]) -> Result<AppliedChanges, SbiError> {
        let mut txn = ConfigTxn::default();
        for (dev, edits) in entries {
            if let Err(e) = txn.stage(&self.sbi, dev, edits) {
                txn.abort(&self.sbi);
                return Err(e);
            }
        }
        txn.commit(&self.sbi)
    }

    fn new_och(st: &mut OpticalState, a: &Identifier, z: &Identifier, route: Route, lambda: u32, implicit: bool) -> (u64, OchConnection) {
        let n = st.next_och;
        st.next_och += 1;
        let och = OchConnection {
            id: Identifier::new(st.domain.clone(), format!("och-{n}")).expect("valid id"),
            a: a.clone(),
            z: z.clone(),
            nodes: route.nodes,
            path: route.links,
            lambda,
            capacity_mbps: OCH_CAPACITY_MBPS,
            allocated_mbps: 0,
            state: ServiceState::Planned,
            implicit,
        };
        (n, och)
    }

    pub fn setup_och(&self, a: &Identifier, z: &Identifier) -> Result<OchConnection, OpticalError> {
        let mut st = self.state.lock();
        let (route, lambda) = st.compute(a, z, &BTreeSet::new())?;
        let (n, mut och) = Self::new_och(&mut st, a, z, route, lambda, false);
        st.occupy(&och);
        och.state = ServiceState::Reserved;
        match self.apply_all(&st.cross_connects(&och)) {
            Ok(_) => {
                och.state = ServiceState::Active;
                st.ochs.insert(n, och.clone());
                Ok(och)
            }
            Err(e) => {
                st.vacate(&och);
                och.state = ServiceState::Failed;
                st.ochs.insert(n, och);
                Err(OpticalError::CommitFailed(e))
            }
        }
    }

    fn remove_och(&self, st: &mut OpticalState, n: u64) -> Result<(), OpticalError> {
        let och = st.ochs[&n].clone();
        self.apply_all(&deletes(st.cross_connects(&och)))
            .map_err(OpticalError::CommitFailed)?;
        st.vacate(&och);
        st.ochs.get_mut(&n).expect("present").state = ServiceState::Deleted;
        Ok(())
    }

    pub fn teardown_och(&self, id: &Identifier) -> Result<(), OpticalError> {
        let mut st = self.state.lock();
        let n = st.och_key(id)?;
        let och = &st.ochs[&n];
        if och.state != ServiceState::Active {
            return Err(OpticalError::BadState {
                id: id.clone(),
                state: och.state,
            });
        }
        if och.allocated_mbps > 0 {
            return Err(OpticalError::OchInUse(id.clone()));
        }
        self.remove_och(&mut st, n)
    }

    /// Best-fit carrier for an ODU: the ACTIVE OCh between the same ROADM pair
    /// with the most allocated bandwidth that still fits; lowest id on ties.
    fn best_fit(st: &OpticalState, a: &Identifier, z: &Identifier, rate: Mbps) -> Option<u64> {
        let pair = |x: &Identifier, y: &Identifier| {
            let (p, q) = (x.node(), y.node());
            if p <= q {
                (p, q)
            } else {
                (q, p)
            }
        };
        let want = pair(a, z);
        st.ochs
            .iter()
            .filter(|(_, o)| o.state == ServiceState::Active && pair(&o.a, &o.z) == want)
            .filter(|(_, o)| o.allocated_mbps + rate <= o.capacity_mbps)
            .max_by(|(ka, oa), (kb, ob)| oa.allocated_mbps.cmp(&ob.allocated_mbps).then(kb.cmp(ka)))
            .map(|(k, _)| *k)
    }

    /// Whether an ODU of `mbps` could be placed now, without changing state.
    pub fn check_odu(&self, a: &Identifier, z: &Identifier, mbps: Mbps) -> Result<(), OpticalError> {
        let st = self.state.lock();
        st.check_add_drop(a)?;
        st.check_add_drop(z)?;
        if Self::best_fit(&st, a, z, mbps).is_some() {
            return Ok(());
        }
        st.compute(a, z, &BTreeSet::new()).map(|_| ())
    }

    /// Phase one: picks or creates a carrier, books capacity (and slots for a
    /// new carrier), and stages all device entries.
    pub fn reserve_odu(&self, a: &Identifier, z: &Identifier, rate: OduRate) -> Result<Identifier, OpticalError> {
        let mut st = self.state.lock();
        st.check_add_drop(a)?;
        st.check_add_drop(z)?;
        if a.node() == z.node() {
            return Err(OpticalError::InvalidRequest("endpoints on the same ROADM".into()));
        }
        let mut entries = Vec::new();
        let (och_n, new_och) = match Self::best_fit(&st, a, z, rate.mbps()) {
            Some(k) => (k, None),
            None => {
                let (route, lambda) = st.compute(a, z, &BTreeSet::new())?;
                let (k, mut och) = Self::new_och(&mut st, a, z, route, lambda, true);
                entries.extend(st.cross_connects(&och));
                st.occupy(&och);
                och.state = ServiceState::Reserved;
                st.ochs.insert(k, och);
                (k, Some(k))
            }
        };
        st.ochs.get_mut(&och_n).expect("present").allocated_mbps += rate.mbps();
        let n = st.next_odu;
        st.next_odu += 1;
        let mut odu = OduService {
            id: Identifier::new(st.domain.clone(), format!("odu-{n}")).expect("valid id"),
            rate,
            a: a.clone(),
            z: z.clone(),
            carrier: st.ochs[&och_n].id.clone(),
            state: ServiceState::Reserved,
        };
        entries.extend(OpticalState::odu_clients(&odu));
        let mut txn = ConfigTxn::default();
        for (dev, edits) in &entries {
            if let Err(e) = txn.stage(&self.sbi, dev, edits) {
                txn.abort(&self.sbi);
                Self::unbook(&mut st, &odu, new_och);
                odu.state = ServiceState::Failed;
                let id = odu.id.clone();
                st.odus.insert(n, odu);
                tracing::debug!(%id, "odu staging failed");
                return Err(OpticalError::CommitFailed(e));
            }
        }
        let id = odu.id.clone();
        st.odus.insert(n, odu);
        st.pending.insert(n, PendingOdu { txn, new_och });
        Ok(id)
    }

    fn unbook(st: &mut OpticalState, odu: &OduService, new_och: Option<u64>) {
        let k = numbered(&odu.carrier, "och-").expect("carrier id");
        let och = st.ochs.get_mut(&k).expect("carrier exists");
        och.allocated_mbps -= odu.rate.mbps();
        if new_och == Some(k) {
            let och = och.clone();
            st.vacate(&och);
            st.ochs.get_mut(&k).expect("present").state = ServiceState::Failed;
        }
    }

    pub fn commit_odu(&self, id: &Identifier) -> Result<OduService, OpticalError> {
        let mut st = self.state.lock();
        let n = st.odu_key(id)?;
        let odu = st.odus[&n].clone();
        if odu.state != ServiceState::Reserved {
            return Err(OpticalError::BadState {
                id: id.clone(),
                state: odu.state,
            });
        }
        let pending = st.pending.remove(&n).expect("reserved ODUs have a staged txn");
        match pending.txn.commit(&self.sbi) {
            Ok(_) => {
                if let Some(k) = pending.new_och {
                    st.ochs.get_mut(&k).expect("present").state = ServiceState::Active;
                }
                let o = st.odus.get_mut(&n).expect("present");
                o.state = ServiceState::Active;
                Ok(o.clone())
            }
            Err(e) => {
                Self::unbook(&mut st, &odu, pending.new_och);
                st.odus.get_mut(&n).expect("present").state = ServiceState::Failed;
                Err(OpticalError::CommitFailed(e))
            }
        }
    }

    pub fn setup_odu(&self, a: &Identifier, z: &Identifier, rate: OduRate) -> Result<OduService, OpticalError> {
        let id = self.reserve_odu(a, z, rate)?;
        self.commit_odu(&id)
    }

    fn remove_odu(&self, st: &mut OpticalState, n: u64) -> Result<(), OpticalError> {
        let odu = st.odus[&n].clone();
        self.apply_all(&deletes(OpticalState::odu_clients(&odu)))
            .map_err(OpticalError::CommitFailed)?;
        let k = numbered(&odu.carrier, "och-").expect("carrier id");
        let och = st.ochs.get_mut(&k).expect("carrier exists");
        och.allocated_mbps -= odu.rate.mbps();
        let release = och.implicit && och.allocated_mbps == 0 && och.state == ServiceState::Active;
        st.odus.get_mut(&n).expect("present").state = ServiceState::Deleted;
        if release {
            self.remove_och(st, k)?;
        }
        Ok(())
    }

    pub fn teardown_odu(&self, id: &Identifier) -> Result<(), OpticalError> {
        let mut st = self.state.lock();
        let n = st.odu_key(id)?;
        let state = st.odus[&n].state;
        if state != ServiceState::Active {
            return Err(OpticalError::BadState { id: id.clone(), state });
        }
        self.remove_odu(&mut st, n)
    }

    /// Undoes a reserved or active ODU.
    pub fn rollback_odu(&self, id: &Identifier) -> Result<(), OpticalError> {
        let mut st = self.state.lock();
        let n = st.odu_key(id)?;
        match st.odus[&n].state {
            ServiceState::Reserved => {
                let odu = st.odus[&n].clone();
                let pending = st.pending.remove(&n);
                let new_och = pending.as_ref().and_then(|p| p.new_och);
                if let Some(p) = pending {
                    p.txn.abort(&self.sbi);
                }
                Self::unbook(&mut st, &odu, new_och);
                st.odus.get_mut(&n).expect("present").state = ServiceState::Failed;
                Ok(())
            }
            ServiceState::Active => self.remove_odu(&mut st, n),
            _ => Ok(()),
        }
    }

    pub fn och(&self, id: &Identifier) -> Result<OchConnection, OpticalError> {
        let st = self.state.lock();
        let n = st.och_key(id)?;
        Ok(st.ochs[&n].clone())
    }

    pub fn odu(&self, id: &Identifier) -> Result<OduService, OpticalError> {
        let st = self.state.lock();
        let n = st.odu_key(id)?;
        Ok(st.odus[&n].clone())
    }

    pub fn ochs(&self) -> Vec<OchConnection> {
        self.state.lock().ochs.values().cloned().collect()
    }

    pub fn odus(&self) -> Vec<OduService> {
        self.state.lock().odus.values().cloned().collect()
    }

    /// ROADMs and fibers as a TE graph. Each fiber is an OCH-layer link whose
    /// capacity counts its wavelengths.
    pub fn topology(&self) -> TopologyGraph {
        let st = self.state.lock();
        let mut g = TopologyGraph::new();
        for (id, ports) in &st.roadms {
            g.add_node(NodeRecord {
                id: id.clone(),
                technology: Technology::Optical,
                ports: ports.clone(),
            });
        }
        for f in st.fibers.values() {
            let free = f.slots.iter().filter(|s| s.is_none()).count() as u64;
            let mut te = TeAttributes::new(1, f.slots.len() as u64 * OCH_CAPACITY_MBPS);
            te.unreserved_mbps = free * OCH_CAPACITY_MBPS;
            g.add_link(LinkRecord::new(f.decl.id.clone(), LayerTag::Och, f.decl.a.clone(), f.decl.z.clone(), te));
        }
        g
    }

    /// Largest ODU-level bandwidth obtainable from `roadm` to any other ROADM.
    pub fn widest_from(&self, roadm: &Identifier) -> Option<Mbps> {
        let st = self.state.lock();
        if !st.roadms.contains_key(roadm) {
            return None;
        }
        let fibers = st.rwa_fibers();
        let mut best = 0;
        for other in st.roadms.keys().filter(|r| *r != roadm) {
            let residual = st
                .ochs
                .values()
                .filter(|o| o.state == ServiceState::Active)
                .filter(|o| {
                    let (p, q) = (o.a.node(), o.z.node());
                    (&p == roadm && &q == other) || (&q == roadm && &p == other)
                })
                .map(|o| o.capacity_mbps - o.allocated_mbps)
                .max()
                .unwrap_or(0);
            best = best.max(residual);
            if best < OCH_CAPACITY_MBPS && first_fit(&fibers, roadm, other, &BTreeSet::new(), st.cap()).is_some() {
                best = OCH_CAPACITY_MBPS;
            }
        }
        Some(best)
    }

    pub fn tapi_view(&self) -> TapiView {
        let st = self.state.lock();
        let nodes = st
            .roadms
            .iter()
            .map(|(id, ports)| TapiNode {
                uuid: id.clone(),
                owned_node_edge_points: ports.iter().cloned().collect(),
            })
            .collect();
        let links = st
            .fibers
            .values()
            .map(|f| TapiLink {
                uuid: f.decl.id.clone(),
                node_edge_points: [f.decl.a.clone(), f.decl.z.clone()],
                layer_protocol: LayerTag::PhotMedia,
                total_slots: f.slots.len() as u32,
                free_slots: f.slots.iter().filter(|s| s.is_none()).count() as u32,
            })
            .collect();
        let mut services: Vec<ConnectivityService> = st
            .ochs
            .values()
            .filter(|o| o.state.holds_resources())
            .map(|o| ConnectivityService {
                uuid: o.id.clone(),
                layer_protocol: LayerTag::Och,
                end_points: [o.a.clone(), o.z.clone()],
                state: o.state,
                lambda: Some(o.lambda),
                rate: None,
                carrier: None,
            })
            .collect();
        services.extend(st.odus.values().filter(|o| o.state.holds_resources()).map(|o| ConnectivityService {
            uuid: o.id.clone(),
            layer_protocol: LayerTag::Odu,
            end_points: [o.a.clone(), o.z.clone()],
            state: o.state,
            lambda: None,
            rate: Some(o.rate),
            carrier: Some(o.carrier.clone()),
        }));
        TapiView {
            context: TapiContext {
                topology: TapiTopology { nodes, links },
                connectivity_services: services,
                service_interface_points: st.add_drops.iter().cloned().collect(),
            },
        }
    }

    pub fn monitoring(&self) -> OpticalMonitoring {
        let st = self.state.lock();
        OpticalMonitoring {
            fibers: st
                .fibers
                .values()
                .map(|f| FiberUsage {
                    fiber: f.decl.id.clone(),
                    total_slots: f.slots.len() as u32,
                    used_slots: f.slots.iter().filter(|s| s.is_some()).count() as u32,
                })
                .collect(),
            ochs: st
                .ochs
                .values()
                .filter(|o| o.state.holds_resources())
                .map(|o| OchUsage {
                    och: o.id.clone(),
                    allocated_mbps: o.allocated_mbps,
                    capacity_mbps: o.capacity_mbps,
                })
                .collect(),
        }
    }

    /// Wavelength exclusivity/continuity and ODU accounting.
    pub fn audit(&self) -> Vec<String> {
        let st = self.state.lock();
        let mut out = Vec::new();
        for f in st.fibers.values() {
            for (w, slot) in f.slots.iter().enumerate() {
                let Some(holder) = slot else { continue };
                let ok = numbered(holder, "och-")
                    .and_then(|k| st.ochs.get(&k))
                    .is_some_and(|o| o.state.holds_resources() && o.lambda as usize == w && o.path.contains(&f.decl.id));
                if !ok {
                    out.push(format!("fiber {} slot {w}: stale holder {holder}", f.decl.id));
                }
            }
        }
        for o in st.ochs.values().filter(|o| o.state.holds_resources()) {
            for f in &o.path {
                if st.fibers[f].slots.get(o.lambda as usize).and_then(|s| s.as_ref()) != Some(&o.id) {
                    out.push(format!("{}: λ{} not held on {f}", o.id, o.lambda));
                }
            }
            let carried: Mbps = st
                .odus
                .values()
                .filter(|d| d.state.holds_resources() && d.carrier == o.id)
                .map(|d| d.rate.mbps())
                .sum();
            if carried != o.allocated_mbps || o.allocated_mbps > o.capacity_mbps {
                out.push(format!(
                    "{}: ODUs sum {carried}, allocated {}, capacity {}",
                    o.id, o.allocated_mbps, o.capacity_mbps
                ));
            }
        }
        out
    }

    pub fn ledger_snapshot(&self) -> serde_json::Value {
        let st = self.state.lock();
        let fibers: BTreeMap<&Identifier, &Vec<Option<Identifier>>> =
            st.fibers.iter().map(|(k, f)| (k, &f.slots)).collect();
        let ochs: BTreeMap<&Identifier, Mbps> = st
            .ochs
            .values()
            .filter(|o| o.state.holds_resources())
            .map(|o| (&o.id, o.allocated_mbps))
            .collect();
        serde_json::json!({ "fibers": fibers, "ochs": ochs })
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Shared vocabulary: identifiers, layers, TE attributes, topology graphs,
//! service intents and the service lifecycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Bandwidth in Mbps. Resource accounting is integral throughout.
pub type Mbps = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("illegal state transition {from} -> {to}")]
    IllegalTransition { from: ServiceState, to: ServiceState },
    #[error("invalid intent: {0}")]
    InvalidIntent(String),
    #[error("graph failed validation ({} violations)", .0.len())]
    InvalidGraph(Vec<Violation>),
    #[error("malformed graph encoding: {0}")]
    Decode(String),
}

/// A name owned by a domain, rendered `domain/local`.
///
/// Ordering is byte-wise on the rendered form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Identifier {
    domain: String,
    local: String,
}

impl Identifier {
    pub fn new(domain: impl Into<String>, local: impl Into<String>) -> Result<Self, ModelError> {
        let domain = domain.into();
        let local = local.into();
        if domain.is_empty() || local.is_empty() || domain.contains('/') {
            return Err(ModelError::InvalidIdentifier(format!("{domain}/{local}")));
        }
        Ok(Self { domain, local })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn local(&self) -> &str {
        &self.local
    }

    pub fn render(&self) -> String {
        format!("{}/{}", self.domain, self.local)
    }

    /// For port identifiers (`domain/NODE:port`), the owning node.
    pub fn node(&self) -> Identifier {
        match self.local.split_once(':') {
            Some((node, _)) => Identifier {
                domain: self.domain.clone(),
                local: node.to_string(),
            },
            None => self.clone(),
        }
    }

    /// For port identifiers, the port name after the colon.
    pub fn port_name(&self) -> Option<&str> {
        self.local.split_once(':').map(|(_, p)| p)
    }

    pub fn is_port(&self) -> bool {
        self.local.contains(':')
    }

    /// Builds `domain/node:port` from a node identifier.
    pub fn port(&self, name: &str) -> Identifier {
        Identifier {
            domain: self.domain.clone(),
            local: format!("{}:{}", self.node().local, name),
        }
    }
}

impl Ord for Identifier {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // "a/b" vs "a/b" compared as rendered bytes; '/' sorts below
        // alphanumerics so a plain tuple compare would diverge for
        // domains that are prefixes of each other.
        self.domain
            .as_bytes()
            .iter()
            .chain(b"/")
            .chain(self.local.as_bytes())
            .cmp(other.domain.as_bytes().iter().chain(b"/").chain(other.local.as_bytes()))
    }
}

impl PartialOrd for Identifier {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.domain, self.local)
    }
}

impl fmt::Debug for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Identifier {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (domain, local) = s
            .split_once('/')
            .ok_or_else(|| ModelError::InvalidIdentifier(s.to_string()))?;
        Identifier::new(domain, local)
    }
}

impl Serialize for Identifier {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Identifier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for building identifiers in code and tests. Panics on malformed input.
pub fn id(s: &str) -> Identifier {
    s.parse().unwrap_or_else(|e| panic!("{e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LayerTag {
    EthL2,
    IpL3,
    Mpls,
    Odu,
    Och,
    PhotMedia,
    MwAir,
}

impl LayerTag {
    pub const ALL: [LayerTag; 7] = [
        LayerTag::EthL2,
        LayerTag::IpL3,
        LayerTag::Mpls,
        LayerTag::Odu,
        LayerTag::Och,
        LayerTag::PhotMedia,
        LayerTag::MwAir,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Technology {
    Ip,
    Optical,
    Mw,
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technology::Ip => "IP",
            Technology::Optical => "OPTICAL",
            Technology::Mw => "MW",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TeAttributes {
    pub te_metric: u32,
    pub capacity_mbps: Mbps,
    pub unreserved_mbps: Mbps,
    pub admin_up: bool,
    pub oper_up: bool,
}

impl TeAttributes {
    pub fn new(te_metric: u32, capacity_mbps: Mbps) -> Self {
        Self {
            te_metric,
            capacity_mbps,
            unreserved_mbps: capacity_mbps,
            admin_up: true,
            oper_up: true,
        }
    }

    pub fn is_up(&self) -> bool {
        self.admin_up && self.oper_up
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: Identifier,
    pub technology: Technology,
    pub ports: BTreeSet<Identifier>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub id: Identifier,
    pub layer: LayerTag,
    pub endpoint_a: Identifier,
    pub endpoint_z: Identifier,
    pub te: TeAttributes,
    #[serde(default = "default_true")]
    pub bidirectional: bool,
}

impl LinkRecord {
    pub fn new(id: Identifier, layer: LayerTag, a: Identifier, z: Identifier, te: TeAttributes) -> Self {
        Self {
            id,
            layer,
            endpoint_a: a,
            endpoint_z: z,
            te,
            bidirectional: true,
        }
    }

    pub fn node_a(&self) -> Identifier {
        self.endpoint_a.node()
    }

    pub fn node_z(&self) -> Identifier {
        self.endpoint_z.node()
    }

    /// The far node when entering the link from `node`.
    pub fn other_end(&self, node: &Identifier) -> Option<Identifier> {
        let (a, z) = (self.node_a(), self.node_z());
        if &a == node {
            Some(z)
        } else if &z == node {
            Some(a)
        } else {
            None
        }
    }
}

/// Multi-layer graph of nodes, ports and links.
///
/// Records are kept as lists so that malformed input (duplicates) survives
/// decoding and can be reported by [`validate_topology`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyGraph {
    pub nodes: Vec<NodeRecord>,
    pub links: Vec<LinkRecord>,
}

impl TopologyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: NodeRecord) {
        self.nodes.push(node);
    }

    pub fn add_link(&mut self, link: LinkRecord) {
        self.links.push(link);
    }

    pub fn node(&self, id: &Identifier) -> Option<&NodeRecord> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn link(&self, id: &Identifier) -> Option<&LinkRecord> {
        self.links.iter().find(|l| &l.id == id)
    }

    pub fn link_mut(&mut self, id: &Identifier) -> Option<&mut LinkRecord> {
        self.links.iter_mut().find(|l| &l.id == id)
    }

    pub fn links_of_layer(&self, layer: LayerTag) -> impl Iterator<Item = &LinkRecord> {
        self.links.iter().filter(move |l| l.layer == layer)
    }

    /// Sorts nodes, ports and links by rendered identifier.
    pub fn canonicalize(&mut self) {
        self.nodes.sort_by(|a, b| a.id.cmp(&b.id));
        self.links.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn canonical(&self) -> TopologyGraph {
        let mut g = self.clone();
        g.canonicalize();
        g
    }

    pub fn merge(&mut self, other: TopologyGraph) {
        self.nodes.extend(other.nodes);
        self.links.extend(other.links);
    }
}

impl PartialEq for TopologyGraph {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.nodes == b.nodes && a.links == b.links
    }
}

impl Eq for TopologyGraph {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DanglingEndpoint,
    DuplicateId,
    UnreservedExceedsCapacity,
    ZeroMetric,
    PortReused,
}

/// One invariant violation found by [`validate_topology`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// The offending node or link.
    pub subject: Identifier,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({}): {}", self.code, self.subject, self.detail)
    }
}

/// Returns every invariant violation of `graph`; empty iff valid.
pub fn validate_topology(graph: &TopologyGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut node_ids = BTreeSet::new();
    let mut ports = BTreeSet::new();
    for node in &graph.nodes {
        if !node_ids.insert(&node.id) {
            out.push(Violation {
                code: ViolationCode::DuplicateId,
                subject: node.id.clone(),
                detail: "node declared more than once".into(),
            });
        }
        ports.extend(node.ports.iter());
    }

    let mut link_ids = BTreeSet::new();
    let mut port_use: BTreeMap<(LayerTag, &Identifier), &Identifier> = BTreeMap::new();
    for link in &graph.links {
        if !link_ids.insert(&link.id) || node_ids.contains(&link.id) {
            out.push(Violation {
                code: ViolationCode::DuplicateId,
                subject: link.id.clone(),
                detail: "link id already in use".into(),
            });
        }
        for end in [&link.endpoint_a, &link.endpoint_z] {
            if !ports.contains(end) {
                out.push(Violation {
                    code: ViolationCode::DanglingEndpoint,
                    subject: link.id.clone(),
                    detail: format!("endpoint {end} is not a declared port"),
                });
                continue;
            }
            if let Some(prev) = port_use.insert((link.layer, end), &link.id) {
                out.push(Violation {
                    code: ViolationCode::PortReused,
                    subject: link.id.clone(),
                    detail: format!("port {end} already used by {prev} at {:?}", link.layer),
                });
            }
        }
        if link.te.unreserved_mbps > link.te.capacity_mbps {
            out.push(Violation {
                code: ViolationCode::UnreservedExceedsCapacity,
                subject: link.id.clone(),
                detail: format!(
                    "unreserved {} > capacity {}",
                    link.te.unreserved_mbps, link.te.capacity_mbps
                ),
            });
        }
        if link.te.te_metric == 0 {
            out.push(Violation {
                code: ViolationCode::ZeroMetric,
                subject: link.id.clone(),
                detail: "te_metric must be at least 1".into(),
            });
        }
    }
    out
}

/// Deterministic JSON encoding of a valid graph.
pub fn canonical_serialize(graph: &TopologyGraph) -> Result<Vec<u8>, ModelError> {
    let violations = validate_topology(graph);
    if !violations.is_empty() {
        return Err(ModelError::InvalidGraph(violations));
    }
    let g = graph.canonical();
    Ok(serde_json::to_vec(&g).expect("graph serialization is infallible"))
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<TopologyGraph, ModelError> {
    serde_json::from_slice(bytes).map_err(|e| ModelError::Decode(e.to_string()))
}

/// A technology-agnostic connectivity request between two ports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceIntent {
    pub a: Identifier,
    pub z: Identifier,
    pub requested_mbps: Mbps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_hint: Option<LayerTag>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub excludes: BTreeSet<Identifier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_group: Option<String>,
}

impl ServiceIntent {
    pub fn new(a: Identifier, z: Identifier, requested_mbps: Mbps) -> Self {
        Self {
            a,
            z,
            requested_mbps,
            layer_hint: None,
            excludes: BTreeSet::new(),
            diversity_group: None,
        }
    }

    pub fn validate(&self, allow_loopback: bool) -> Result<(), ModelError> {
        if self.requested_mbps == 0 {
            return Err(ModelError::InvalidIntent("requested_mbps must be > 0".into()));
        }
        if !allow_loopback && self.a == self.z {
            return Err(ModelError::InvalidIntent("endpoints must be distinct".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ServiceState {
    Planned,
    Reserved,
    Active,
    Failed,
    Deleted,
}

impl ServiceState {
    pub const ALL: [ServiceState; 5] = [
        ServiceState::Planned,
        ServiceState::Reserved,
        ServiceState::Active,
        ServiceState::Failed,
        ServiceState::Deleted,
    ];

    pub fn can_transition(self, to: ServiceState) -> bool {
        use ServiceState::*;
        matches!(
            (self, to),
            (Planned, Reserved)
                | (Reserved, Active)
                | (Planned, Failed)
                | (Reserved, Failed)
                | (Active, Deleted)
                | (Failed, Deleted)
        )
    }

    pub fn transition(self, to: ServiceState) -> Result<ServiceState, ModelError> {
        if self.can_transition(to) {
            Ok(to)
        } else {
            Err(ModelError::IllegalTransition { from: self, to })
        }
    }

    pub fn holds_resources(self) -> bool {
        matches!(self, ServiceState::Reserved | ServiceState::Active)
    }
}

impl fmt::Display for ServiceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ServiceState::Planned => "PLANNED",
            ServiceState::Reserved => "RESERVED",
            ServiceState::Active => "ACTIVE",
            ServiceState::Failed => "FAILED",
            ServiceState::Deleted => "DELETED",
        };
        f.write_str(s)
    }
}

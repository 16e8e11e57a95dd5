// SPDX-License-Identifier: Apache-2.0

//! Topology file: everything needed to boot a simulated network, and nothing
//! that describes runtime state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::config::Edit;
use crate::device::schema::Schema;
use crate::device::{DeviceDescriptor, VendorProfile};
use crate::model::{validate_topology, Identifier, LayerTag, LinkRecord, Mbps, NodeRecord, TeAttributes, Technology, TopologyGraph};
use crate::mw::AirInterfaceConfig;
use crate::sdtn::{AttachmentPort, InterDomainLink, SDTN_DOMAIN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDecl {
    pub name: String,
    pub technology: Technology,
}

fn default_model_version() -> String {
    "1.0".into()
}

fn default_profile() -> VendorProfile {
    VendorProfile::Native
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDecl {
    pub id: Identifier,
    pub technology: Technology,
    #[serde(default = "default_profile")]
    pub vendor_profile: VendorProfile,
    #[serde(default = "default_model_version")]
    pub model_version: String,
    pub ports: Vec<String>,
    /// Applied on top of the factory defaults.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<Edit>,
}

impl DeviceDecl {
    pub fn descriptor(&self) -> DeviceDescriptor {
        DeviceDescriptor {
            id: self.id.clone(),
            technology: self.technology,
            vendor_profile: self.vendor_profile,
            model_version: self.model_version.clone(),
            ports: self.ports.clone(),
        }
    }

    pub fn node_record(&self) -> NodeRecord {
        NodeRecord {
            id: self.id.clone(),
            technology: self.technology,
            ports: self.ports.iter().map(|p| self.id.port(p)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeDecl {
    pub te_metric: u32,
    pub capacity_mbps: Mbps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDecl {
    pub id: Identifier,
    pub domain: String,
    pub layer: LayerTag,
    pub a: Identifier,
    pub z: Identifier,
    /// IP links.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub te: Option<TeDecl>,
    /// Fibers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelengths: Option<u32>,
    /// Radio links.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub air_interface: Option<AirInterfaceConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub domains: Vec<DomainDecl>,
    #[serde(default)]
    pub devices: Vec<DeviceDecl>,
    #[serde(default)]
    pub links: Vec<LinkDecl>,
    #[serde(default)]
    pub inter_domain_links: Vec<InterDomainLink>,
    #[serde(default)]
    pub attachment_ports: Vec<AttachmentPort>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
}

pub fn parse_topology(text: &str) -> Result<TopologyFile, LoadError> {
    serde_json::from_str(text).map_err(|e| LoadError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

fn expected_layers(tech: Technology) -> &'static [LayerTag] {
    match tech {
        Technology::Ip => &[LayerTag::IpL3],
        Technology::Optical => &[LayerTag::Och, LayerTag::PhotMedia],
        Technology::Mw => &[LayerTag::MwAir],
    }
}

impl TopologyFile {
    pub fn domain_of(&self, tech: Technology) -> Option<&DomainDecl> {
        self.domains.iter().find(|d| d.technology == tech)
    }

    pub fn device(&self, id: &Identifier) -> Option<&DeviceDecl> {
        self.devices.iter().find(|d| &d.id == id)
    }

    fn port_declared(&self, p: &Identifier) -> bool {
        p.port_name()
            .is_some_and(|name| self.device(&p.node()).is_some_and(|d| d.ports.iter().any(|q| q == name)))
    }

    /// The declared graph: every link plus the inter-domain links.
    pub fn graph(&self) -> TopologyGraph {
        let mut g = TopologyGraph::new();
        for d in &self.devices {
            g.add_node(d.node_record());
        }
        for l in &self.links {
            let te = match (l.te, l.wavelengths) {
                (Some(t), _) => TeAttributes::new(t.te_metric, t.capacity_mbps),
                (None, Some(w)) => TeAttributes::new(1, u64::from(w) * crate::optical::OCH_CAPACITY_MBPS),
                _ => {
                    let cap = l
                        .air_interface
                        .map(|c| crate::mw::capacity_mbps(c.channel_bandwidth_mhz, c.modulation_max))
                        .unwrap_or(0);
                    TeAttributes::new(1, cap)
                }
            };
            g.add_link(LinkRecord::new(l.id.clone(), l.layer, l.a.clone(), l.z.clone(), te));
        }
        for l in &self.inter_domain_links {
            g.add_link(LinkRecord::new(
                l.id.clone(),
                l.layer,
                l.a.clone(),
                l.z.clone(),
                TeAttributes::new(1, l.capacity_mbps),
            ));
        }
        g
    }

    /// Referential and structural checks. Returns every problem found.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut names = BTreeSet::new();
        let mut techs = BTreeSet::new();
        let mut domains: BTreeMap<&str, Technology> = BTreeMap::new();
        for d in &self.domains {
            if Identifier::new(d.name.clone(), "x").is_err() || d.name == SDTN_DOMAIN {
                out.push(format!("domain name {:?} not allowed", d.name));
            }
            if !names.insert(&d.name) {
                out.push(format!("duplicate domain {}", d.name));
            }
            if !techs.insert(d.technology) {
                out.push(format!("more than one {} domain", d.technology));
            }
            domains.insert(&d.name, d.technology);
        }
        let mut ids = BTreeSet::new();
        for d in &self.devices {
            if !ids.insert(&d.id) {
                out.push(format!("duplicate device {}", d.id));
            }
            match domains.get(d.id.domain()) {
                Some(t) if *t == d.technology => {}
                Some(t) => out.push(format!("device {} is {} but its domain is {t}", d.id, d.technology)),
                None => out.push(format!("device {} in undeclared domain", d.id)),
            }
            if let Err(e) = d.descriptor().check() {
                out.push(e.to_string());
            }
            let schema = Schema::for_technology(d.technology);
            for e in &d.overrides {
                if let Err(v) = schema.check_edit(e) {
                    out.push(format!("device {} override {}: {}", d.id, v.path, v.reason));
                }
            }
            let unique: BTreeSet<&String> = d.ports.iter().collect();
            if unique.len() != d.ports.len() {
                out.push(format!("device {} declares a port twice", d.id));
            }
        }
        for l in &self.links {
            let Some(tech) = domains.get(l.domain.as_str()).copied() else {
                out.push(format!("link {} in undeclared domain {}", l.id, l.domain));
                continue;
            };
            if l.id.domain() != l.domain {
                out.push(format!("link {} does not belong to domain {}", l.id, l.domain));
            }
            if !expected_layers(tech).contains(&l.layer) {
                out.push(format!("link {}: layer {:?} invalid for {tech}", l.id, l.layer));
            }
            for p in [&l.a, &l.z] {
                if !self.port_declared(p) {
                    out.push(format!("link {}: endpoint {p} not declared", l.id));
                } else if p.domain() != l.domain {
                    out.push(format!("link {}: endpoint {p} outside domain", l.id));
                }
            }
            match tech {
                Technology::Ip if l.te.is_none() => out.push(format!("link {}: missing te", l.id)),
                Technology::Optical if l.wavelengths.is_none_or(|w| w == 0) => {
                    out.push(format!("link {}: wavelengths must be positive", l.id))
                }
                Technology::Mw => match &l.air_interface {
                    None => out.push(format!("link {}: missing air_interface", l.id)),
                    Some(c) => {
                        if let Err(e) = c.check() {
                            out.push(format!("link {}: {e}", l.id));
                        }
                    }
                },
                _ => {}
            }
        }
        for l in &self.inter_domain_links {
            for p in [&l.a, &l.z] {
                if !self.port_declared(p) {
                    out.push(format!("inter-domain link {}: endpoint {p} not declared", l.id));
                }
            }
            if l.a.domain() == l.z.domain() {
                out.push(format!("inter-domain link {}: endpoints in the same domain", l.id));
            }
        }
        for a in &self.attachment_ports {
            let tech = |p: &Identifier| domains.get(p.domain()).copied();
            if !self.port_declared(&a.router_port) || tech(&a.router_port) != Some(Technology::Ip) {
                out.push(format!("attachment: {} is not a router port", a.router_port));
            }
            let add_drop = a.roadm_port.port_name().is_some_and(|n| n.starts_with("ad"));
            if !self.port_declared(&a.roadm_port) || tech(&a.roadm_port) != Some(Technology::Optical) || !add_drop {
                out.push(format!("attachment: {} is not a ROADM add/drop port", a.roadm_port));
            }
        }
        if out.is_empty() {
            out.extend(validate_topology(&self.graph()).iter().map(ToString::to_string));
        }
        out
    }
}

/// The reference network shipped with the repository.
pub const REFNET: &str = include_str!("../../../topologies/refnet.json");

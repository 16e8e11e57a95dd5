// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference implementations and random instance generators.
//! Nothing here calls the code under test except to build inputs for it.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use ifusion_core::device::config::{ConfigTree, Edit};
use ifusion_core::device::{DeviceDescriptor, DeviceFault, DevicePlane, VendorProfile};
use ifusion_core::mediation::{Mediator, RuleSet};
use ifusion_core::model::{id, Identifier, LayerTag, LinkRecord, NodeRecord, TeAttributes, Technology, TopologyGraph};
use ifusion_core::sbi::{SbiError, Southbound};
use rand::seq::SliceRandom;
use rand::Rng;

/// Names of uneven length so prefix ordering matters.
const NAMES: [&str; 10] = ["a", "a1", "aa", "b", "B", "c10", "c2", "d", "e", "z0"];

#[derive(Debug, Clone)]
pub struct TeLink {
    pub id: String,
    pub a: String,
    pub z: String,
    pub metric: u32,
    pub capacity: u64,
    pub unreserved: u64,
    pub up: bool,
}

#[derive(Debug, Clone)]
pub struct TeGraph {
    pub nodes: Vec<String>,
    pub links: Vec<TeLink>,
}

fn shuffled_names(rng: &mut impl Rng, n: usize, domain: &str) -> Vec<String> {
    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(rng);
    names[..n].iter().map(|s| format!("{domain}/{s}")).collect()
}

/// A connected multigraph: random spanning tree, extra chords, the odd
/// parallel link, random reservations and the odd link down.
pub fn random_te_graph(rng: &mut impl Rng, max_nodes: usize) -> TeGraph {
    let n = rng.gen_range(2..=max_nodes);
    let nodes = shuffled_names(rng, n, "ip");
    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.gen_range(0..i), i));
    }
    for _ in 0..rng.gen_range(0..=n * 2) {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            pairs.push((i, j));
        }
    }
    let mut ids: Vec<usize> = (0..pairs.len()).collect();
    ids.shuffle(rng);
    let links = pairs
        .into_iter()
        .zip(ids)
        .map(|((i, j), k)| {
            let capacity = [1000, 2500, 10000][rng.gen_range(0..3)];
            let reserved = if rng.gen_bool(0.5) { rng.gen_range(0..=capacity) } else { 0 };
            TeLink {
                id: format!("ip/l{k}"),
                a: nodes[i].clone(),
                z: nodes[j].clone(),
                metric: rng.gen_range(1..=100),
                capacity,
                unreserved: capacity - reserved,
                up: rng.gen_bool(0.9),
            }
        })
        .collect();
    TeGraph { nodes, links }
}

impl TeGraph {
    pub fn to_topology(&self) -> TopologyGraph {
        let mut g = TopologyGraph::new();
        let mut ports: BTreeMap<&str, BTreeSet<Identifier>> = BTreeMap::new();
        let mut records = Vec::new();
        for (k, l) in self.links.iter().enumerate() {
            let pa = id(&format!("{}:p{k}a", l.a));
            let pz = id(&format!("{}:p{k}z", l.z));
            ports.entry(&l.a).or_default().insert(pa.clone());
            ports.entry(&l.z).or_default().insert(pz.clone());
            let mut te = TeAttributes::new(l.metric, l.capacity);
            te.unreserved_mbps = l.unreserved;
            te.oper_up = l.up;
            records.push(LinkRecord::new(id(&l.id), LayerTag::IpL3, pa, pz, te));
        }
        for n in &self.nodes {
            g.add_node(NodeRecord {
                id: id(n),
                technology: Technology::Ip,
                ports: ports.remove(n.as_str()).unwrap_or_default(),
            });
        }
        for r in records {
            g.add_link(r);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Best {
    pub cost: u64,
    pub nodes: Vec<String>,
    pub links: Vec<String>,
}

/// Walks every simple path and keeps the minimum by (cost, hops, rendered
/// node sequence, rendered link sequence).
pub fn cspf_oracle(g: &TeGraph, head: &str, tail: &str, mbps: u64, excludes: &BTreeSet<String>) -> Option<Best> {
    if head == tail {
        return Some(Best {
            cost: 0,
            nodes: vec![head.to_string()],
            links: vec![],
        });
    }
    let usable: Vec<&TeLink> = g
        .links
        .iter()
        .filter(|l| l.up && l.unreserved >= mbps)
        .filter(|l| !excludes.contains(&l.id) && !excludes.contains(&l.a) && !excludes.contains(&l.z))
        .collect();
    let mut best: Option<Best> = None;
    let mut stack = vec![(vec![head.to_string()], Vec::<String>::new(), 0u64)];
    while let Some((nodes, links, cost)) = stack.pop() {
        let at = nodes.last().unwrap().clone();
        if at == tail {
            let cand = Best { cost, nodes, links };
            let key = |b: &Best| (b.cost, b.links.len(), b.nodes.clone(), b.links.clone());
            if best.as_ref().is_none_or(|b| key(&cand) < key(b)) {
                best = Some(cand);
            }
            continue;
        }
        for l in &usable {
            let next = if l.a == at {
                &l.z
            } else if l.z == at {
                &l.a
            } else {
                continue;
            };
            if nodes.contains(next) {
                continue;
            }
            let mut n2 = nodes.clone();
            n2.push(next.clone());
            let mut l2 = links.clone();
            l2.push(l.id.clone());
            stack.push((n2, l2, cost + u64::from(l.metric)));
        }
    }
    best
}

/// Connected in the raw graph, ignoring every constraint.
pub fn raw_connected(g: &TeGraph, a: &str, z: &str) -> bool {
    let mut seen = BTreeSet::from([a.to_string()]);
    let mut todo = vec![a.to_string()];
    while let Some(n) = todo.pop() {
        for l in &g.links {
            for (x, y) in [(&l.a, &l.z), (&l.z, &l.a)] {
                if *x == n && seen.insert(y.clone()) {
                    todo.push(y.clone());
                }
            }
        }
    }
    seen.contains(z)
}

#[derive(Debug, Clone)]
pub struct Fiber {
    pub id: String,
    pub a: String,
    pub z: String,
    pub occupied: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub roadms: Vec<String>,
    pub fibers: Vec<Fiber>,
    pub wavelengths: usize,
}

/// Connected optical mesh with at most `max_nodes` ROADMs and W ≤ `max_w`.
pub fn random_mesh(rng: &mut impl Rng, max_nodes: usize, max_w: usize, occupancy: f64) -> Mesh {
    let n = rng.gen_range(2..=max_nodes);
    let w = rng.gen_range(1..=max_w);
    let roadms = shuffled_names(rng, n, "optical");
    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.gen_range(0..i), i));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            pairs.push((i, j));
        }
    }
    let fibers = pairs
        .into_iter()
        .enumerate()
        .map(|(k, (i, j))| Fiber {
            id: format!("optical/f{k}"),
            a: roadms[i].clone(),
            z: roadms[j].clone(),
            occupied: (0..w).map(|_| rng.gen_bool(occupancy)).collect(),
        })
        .collect();
    Mesh {
        roadms,
        fibers,
        wavelengths: w,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lightpath {
    pub nodes: Vec<String>,
    pub links: Vec<String>,
    pub lambda: u32,
}

/// Minimum over every (simple path, free λ) pair by (hops, node sequence,
/// link sequence, λ).
pub fn rwa_oracle(fibers: &[Fiber], src: &str, dst: &str) -> Option<Lightpath> {
    let mut best: Option<Lightpath> = None;
    let key = |p: &Lightpath| (p.links.len(), p.nodes.clone(), p.links.clone(), p.lambda);
    let mut stack = vec![(vec![src.to_string()], Vec::<usize>::new())];
    while let Some((nodes, path)) = stack.pop() {
        let at = nodes.last().unwrap().clone();
        if at == dst && !path.is_empty() {
            let w = path.iter().map(|&i| fibers[i].occupied.len()).min().unwrap();
            for lambda in 0..w {
                if path.iter().all(|&i| !fibers[i].occupied[lambda]) {
                    let cand = Lightpath {
                        nodes: nodes.clone(),
                        links: path.iter().map(|&i| fibers[i].id.clone()).collect(),
                        lambda: lambda as u32,
                    };
                    if best.as_ref().is_none_or(|b| key(&cand) < key(b)) {
                        best = Some(cand);
                    }
                }
            }
            continue;
        }
        for (i, f) in fibers.iter().enumerate() {
            let next = if f.a == at {
                &f.z
            } else if f.z == at {
                &f.a
            } else {
                continue;
            };
            if nodes.contains(next) {
                continue;
            }
            let mut n2 = nodes.clone();
            n2.push(next.clone());
            let mut p2 = path.clone();
            p2.push(i);
            stack.push((n2, p2));
        }
    }
    best
}

/// A topology file holding only the mesh, every ROADM with two add/drop ports.
pub fn mesh_topology_json(mesh: &Mesh) -> String {
    let mut ports: BTreeMap<&str, Vec<String>> = mesh.roadms.iter().map(|r| (r.as_str(), vec!["ad1".into(), "ad2".into()])).collect();
    let mut links = Vec::new();
    for (k, f) in mesh.fibers.iter().enumerate() {
        ports.get_mut(f.a.as_str()).unwrap().push(format!("deg{k}a"));
        ports.get_mut(f.z.as_str()).unwrap().push(format!("deg{k}z"));
        links.push(serde_json::json!({
            "id": f.id, "domain": "optical", "layer": "OCH",
            "a": format!("{}:deg{k}a", f.a), "z": format!("{}:deg{k}z", f.z),
            "wavelengths": mesh.wavelengths,
        }));
    }
    let devices: Vec<_> = ports
        .into_iter()
        .map(|(r, p)| serde_json::json!({"id": r, "technology": "OPTICAL", "ports": p}))
        .collect();
    serde_json::json!({
        "domains": [{"name": "optical", "technology": "OPTICAL"}],
        "devices": devices,
        "links": links,
    })
    .to_string()
}

/// One step of a paired configuration scenario.
#[derive(Debug, Clone)]
pub enum ConfigOp {
    Edit(Vec<Edit>),
    Commit,
    Discard,
    FailNextCommit,
    FailNextEdit,
}

const RADIO: &str = "/air-interface/radio0";

fn random_edit(rng: &mut impl Rng) -> Edit {
    let leaf = |name: &str| format!("{RADIO}/{name}");
    let mods = ["QPSK", "QAM16", "QAM64", "QAM256", "QAM1024"];
    match rng.gen_range(0..12) {
        0 => Edit::set(leaf("channel_bandwidth_mhz"), [7i64, 14, 28, 56, 112][rng.gen_range(0..5)]),
        1 => Edit::set(leaf("modulation_min"), mods[rng.gen_range(0..2)]),
        2 => Edit::set(leaf("modulation_max"), mods[rng.gen_range(0..5)]),
        3 => Edit::set(leaf("adaptive"), rng.gen_bool(0.5)),
        4 => Edit::set(leaf("tx_power_dbm"), rng.gen_range(-10i64..=35)),
        5 => Edit::set(leaf("tx_frequency_khz"), rng.gen_range(6_000_000i64..40_000_000)),
        // invalid values
        6 => Edit::set(leaf("channel_bandwidth_mhz"), 30i64),
        7 => Edit::set(leaf("tx_power_dbm"), 99i64),
        8 => Edit::set(leaf("modulation_max"), "QAM4096"),
        // outside the standard model
        9 => Edit::set(leaf("xpic"), true),
        10 => Edit::delete(leaf("tx_power_dbm")),
        _ => Edit::set(leaf("adaptive"), "yes"),
    }
}

pub fn random_config_ops(rng: &mut impl Rng, len: usize) -> Vec<ConfigOp> {
    (0..len)
        .map(|_| match rng.gen_range(0..20) {
            0..=10 => ConfigOp::Edit((0..rng.gen_range(1..=3)).map(|_| random_edit(rng)).collect()),
            11..=15 => ConfigOp::Commit,
            16..=17 => ConfigOp::Discard,
            18 => ConfigOp::FailNextCommit,
            _ => ConfigOp::FailNextEdit,
        })
        .collect()
}

/// Everything a controller can observe from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub outcomes: Vec<bool>,
    pub running: Vec<ConfigTree>,
    pub notifications: Vec<String>,
}

/// Runs `ops` through the southbound layer against one device, the way a
/// controller would: one session per commit cycle.
pub fn observe(sbi: &Southbound, dev: &Identifier, ops: &[ConfigOp]) -> Observation {
    let mut outcomes = Vec::new();
    let mut running = Vec::new();
    let mut session = None;
    for op in ops {
        let s = match session {
            Some(s) => s,
            None => {
                let s = sbi.open(dev).expect("device is free");
                session = Some(s);
                s
            }
        };
        let result: Result<(), SbiError> = match op {
            ConfigOp::Edit(edits) => sbi.edit(dev, s, edits),
            ConfigOp::Commit => {
                let r = sbi.commit(dev, s).map(|_| ());
                sbi.close(dev, s).unwrap();
                session = None;
                r
            }
            ConfigOp::Discard => {
                sbi.close(dev, s).unwrap();
                session = None;
                Ok(())
            }
            ConfigOp::FailNextCommit => sbi.plane().inject(dev, DeviceFault::CommitFail).map_err(SbiError::from),
            ConfigOp::FailNextEdit => sbi.plane().inject(dev, DeviceFault::EditFail).map_err(SbiError::from),
        };
        outcomes.push(result.is_ok());
        running.push(sbi.running(dev).expect("device readable"));
    }
    if let Some(s) = session {
        sbi.close(dev, s).unwrap();
    }
    let notifications = sbi
        .plane()
        .event_log(dev)
        .unwrap()
        .into_iter()
        .map(|e| format!("{:?}", e.kind))
        .collect();
    Observation {
        outcomes,
        running,
        notifications,
    }
}

/// A native and a legacy radio side by side behind one southbound layer.
pub fn paired_plane() -> (Southbound, Identifier, Identifier) {
    let native = id("mw/N");
    let legacy = id("mw/L");
    let mut plane = DevicePlane::new();
    plane
        .add_device(DeviceDescriptor::new(native.clone(), Technology::Mw, VendorProfile::Native, &["radio0"]))
        .unwrap();
    plane
        .add_device(DeviceDescriptor::new(legacy.clone(), Technology::Mw, VendorProfile::Legacy, &["radio0"]))
        .unwrap();
    let plane = Arc::new(plane);
    let mediator = Arc::new(Mediator::new(plane.clone(), RuleSet::mw_legacy()));
    (Southbound::new(plane, mediator), native, legacy)
}

/// Paired execution; returns the first divergence.
pub fn transparency_diff(ops: &[ConfigOp]) -> Result<(), String> {
    let (sbi, native, legacy) = paired_plane();
    let n = observe(&sbi, &native, ops);
    let l = observe(&sbi, &legacy, ops);
    for (i, op) in ops.iter().enumerate() {
        if n.outcomes[i] != l.outcomes[i] {
            return Err(format!("step {i} {op:?}: native ok={} legacy ok={}", n.outcomes[i], l.outcomes[i]));
        }
        if n.running[i] != l.running[i] {
            return Err(format!("step {i} {op:?}: running configs differ:\n{:?}\n{:?}", n.running[i], l.running[i]));
        }
    }
    if n.notifications != l.notifications {
        return Err(format!("notifications differ: {:?} vs {:?}", n.notifications, l.notifications));
    }
    Ok(())
}

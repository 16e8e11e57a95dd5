// SPDX-License-Identifier: Apache-2.0

//! Path computation primitives shared by the domain controllers: constrained
//! shortest path (CSPF), widest-path bottlenecks, and ordered simple-path
//! enumeration for wavelength assignment.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Identifier, LayerTag, LinkRecord, Mbps, TopologyGraph};

/// Why no path could be found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoPathReason {
    /// A path exists in the raw graph but every one is pruned by constraints.
    PrunedAll,
    /// No path exists even ignoring constraints.
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("no path ({0:?})")]
    NoPath(NoPathReason),
    #[error("unknown node {0}")]
    UnknownNode(Identifier),
}

/// A computed route: node sequence, traversed links and total metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<Identifier>,
    pub links: Vec<Identifier>,
    pub cost: u64,
}

impl Route {
    pub fn trivial(node: Identifier) -> Self {
        Self {
            nodes: vec![node],
            links: Vec::new(),
            cost: 0,
        }
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }
}

/// Total order used for deterministic selection: cost, hop count, node
/// sequence, then link sequence (parallel links).
pub fn route_order(a: &Route, b: &Route) -> Ordering {
    a.cost
        .cmp(&b.cost)
        .then(a.links.len().cmp(&b.links.len()))
        .then_with(|| a.nodes.cmp(&b.nodes))
        .then_with(|| a.links.cmp(&b.links))
}

/// Adjacency entry: (neighbor, link index into the source slice).
type Adjacency = BTreeMap<Identifier, Vec<(Identifier, usize)>>;

fn adjacency<'a>(links: impl Iterator<Item = (usize, &'a LinkRecord)>) -> Adjacency {
    let mut adj: Adjacency = BTreeMap::new();
    for (idx, link) in links {
        let (a, z) = (link.node_a(), link.node_z());
        adj.entry(a.clone()).or_default().push((z.clone(), idx));
        adj.entry(z).or_default().push((a, idx));
    }
    adj
}

fn known_nodes(graph: &TopologyGraph, layer: LayerTag) -> BTreeSet<Identifier> {
    let mut nodes: BTreeSet<Identifier> = graph.nodes.iter().map(|n| n.id.clone()).collect();
    for l in graph.links_of_layer(layer) {
        nodes.insert(l.node_a());
        nodes.insert(l.node_z());
    }
    nodes
}

#[derive(Clone, PartialEq, Eq)]
struct Label(Route);

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        route_order(&self.0, &other.0)
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Constrained shortest path over the links of `layer`.
///
/// Prunes links that are down, have `unreserved_mbps < requested_mbps`, or
/// are excluded (directly or through an excluded end node), then minimises
/// Σ te_metric with ties broken by [`route_order`]. `head == tail` yields the
/// empty route.
pub fn cspf(
    graph: &TopologyGraph,
    layer: LayerTag,
    head: &Identifier,
    tail: &Identifier,
    requested_mbps: Mbps,
    excludes: &BTreeSet<Identifier>,
) -> Result<Route, PathError> {
    let nodes = known_nodes(graph, layer);
    for n in [head, tail] {
        if !nodes.contains(n) {
            return Err(PathError::UnknownNode(n.clone()));
        }
    }
    if head == tail {
        return Ok(Route::trivial(head.clone()));
    }
    let links: Vec<&LinkRecord> = graph.links_of_layer(layer).collect();
    let feasible = |l: &LinkRecord| {
        l.te.is_up()
            && l.te.unreserved_mbps >= requested_mbps
            && !excludes.contains(&l.id)
            && !excludes.contains(&l.node_a())
            && !excludes.contains(&l.node_z())
    };
    let adj = adjacency(links.iter().copied().enumerate().filter(|(_, l)| feasible(l)));

    let mut done: BTreeSet<Identifier> = BTreeSet::new();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Label(Route::trivial(head.clone()))));
    while let Some(Reverse(Label(route))) = heap.pop() {
        let at = route.nodes.last().expect("routes are non-empty").clone();
        if !done.insert(at.clone()) {
            continue;
        }
        if &at == tail {
            return Ok(route);
        }
        for (next, idx) in adj.get(&at).into_iter().flatten() {
            if done.contains(next) {
                continue;
            }
            let link = links[*idx];
            let mut r = route.clone();
            r.cost += u64::from(link.te.te_metric);
            r.nodes.push(next.clone());
            r.links.push(link.id.clone());
            heap.push(Reverse(Label(r)));
        }
    }

    let raw = adjacency(links.iter().copied().enumerate());
    let reason = if reachable(&raw, head).contains(tail) {
        NoPathReason::PrunedAll
    } else {
        NoPathReason::Disconnected
    };
    Err(PathError::NoPath(reason))
}

fn reachable(adj: &Adjacency, from: &Identifier) -> BTreeSet<Identifier> {
    let mut seen = BTreeSet::from([from.clone()]);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(n) = queue.pop_front() {
        for (m, _) in adj.get(&n).into_iter().flatten() {
            if seen.insert(m.clone()) {
                queue.push_back(m.clone());
            }
        }
    }
    seen
}

/// Largest bottleneck (min unreserved) over up links of `layer` from `from`
/// to any other node. `None` when no other node is reachable.
pub fn widest_from(graph: &TopologyGraph, layer: LayerTag, from: &Identifier) -> Option<Mbps> {
    let links: Vec<&LinkRecord> = graph.links_of_layer(layer).filter(|l| l.te.is_up()).collect();
    let adj = adjacency(links.iter().copied().enumerate());
    let mut best: BTreeMap<Identifier, Mbps> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    heap.push((Mbps::MAX, from.clone()));
    let mut done = BTreeSet::new();
    while let Some((width, at)) = heap.pop() {
        if !done.insert(at.clone()) {
            continue;
        }
        for (next, idx) in adj.get(&at).into_iter().flatten() {
            let w = width.min(links[*idx].te.unreserved_mbps);
            if !done.contains(next) && best.get(next).is_none_or(|b| w > *b) {
                best.insert(next.clone(), w);
                heap.push((w, next.clone()));
            }
        }
    }
    best.into_iter()
        .filter(|(n, _)| n != from)
        .map(|(_, w)| w)
        .max()
}

/// Undirected multigraph used for ordered path enumeration.
#[derive(Debug, Clone, Default)]
pub struct EdgeList {
    /// (link id, end a, end z)
    pub edges: Vec<(Identifier, Identifier, Identifier)>,
}

impl EdgeList {
    pub fn push(&mut self, link: Identifier, a: Identifier, z: Identifier) {
        self.edges.push((link, a, z));
    }

    fn adjacency(&self) -> BTreeMap<&Identifier, Vec<(&Identifier, &Identifier)>> {
        let mut adj: BTreeMap<&Identifier, Vec<(&Identifier, &Identifier)>> = BTreeMap::new();
        for (l, a, z) in &self.edges {
            adj.entry(a).or_default().push((z, l));
            adj.entry(z).or_default().push((a, l));
        }
        for v in adj.values_mut() {
            v.sort();
        }
        adj
    }

    pub fn node_count(&self) -> usize {
        self.edges
            .iter()
            .flat_map(|(_, a, z)| [a, z])
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Visits simple paths from `src` to `dst` in order of hop count, then node
/// sequence, then link sequence. Stops after `cap` paths when given, or when
/// `visit` breaks. Every route has cost equal to its hop count.
pub fn for_each_ordered_path<F>(
    graph: &EdgeList,
    src: &Identifier,
    dst: &Identifier,
    cap: Option<usize>,
    mut visit: F,
) where
    F: FnMut(&Route) -> ControlFlow<()>,
{
    if src == dst {
        return;
    }
    let adj = graph.adjacency();
    if !adj.contains_key(src) || !adj.contains_key(dst) {
        return;
    }
    // hop distance to dst, used to prune depth-limited searches
    let mut dist: BTreeMap<&Identifier, usize> = BTreeMap::from([(dst, 0)]);
    let mut queue = VecDeque::from([dst]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n];
        for (m, _) in &adj[n] {
            if !dist.contains_key(m) {
                dist.insert(m, d + 1);
                queue.push_back(m);
            }
        }
    }
    let Some(&min_len) = dist.get(src) else {
        return;
    };
    let max_len = adj.len() - 1;
    let mut yielded = 0usize;
    for len in min_len..=max_len {
        let mut batch = Vec::new();
        let mut nodes = vec![src];
        let mut links = Vec::new();
        collect_exact(&adj, &dist, dst, len, &mut nodes, &mut links, &mut batch);
        batch.sort_by(route_order);
        for r in batch {
            if cap.is_some_and(|c| yielded >= c) {
                return;
            }
            yielded += 1;
            if visit(&r).is_break() {
                return;
            }
        }
    }
}

fn collect_exact<'a>(
    adj: &BTreeMap<&'a Identifier, Vec<(&'a Identifier, &'a Identifier)>>,
    dist: &BTreeMap<&'a Identifier, usize>,
    dst: &Identifier,
    len: usize,
    nodes: &mut Vec<&'a Identifier>,
    links: &mut Vec<&'a Identifier>,
    out: &mut Vec<Route>,
) {
    let at = *nodes.last().expect("non-empty");
    if links.len() == len {
        if at == dst {
            out.push(Route {
                nodes: nodes.iter().map(|n| (*n).clone()).collect(),
                links: links.iter().map(|l| (*l).clone()).collect(),
                cost: len as u64,
            });
        }
        return;
    }
    if at == dst {
        return;
    }
    let remaining = len - links.len();
    for (next, link) in &adj[at] {
        if nodes.contains(next) {
            continue;
        }
        match dist.get(next) {
            Some(d) if *d < remaining => {}
            _ => continue,
        }
        nodes.push(next);
        links.push(link);
        collect_exact(adj, dist, dst, len, nodes, links, out);
        nodes.pop();
        links.pop();
    }
}

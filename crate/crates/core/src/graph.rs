//! Anonymous port-labeled simple undirected graphs.
//!
//! Node identifiers `0..n` exist for the harness only. Agents see nothing but
//! the degree of the node they stand on; an edge is identified locally by its
//! port label, `1..=deg(v)`.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

/// A 1-based port label.
pub type Port = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid port: {0}")]
    InvalidPort(String),
    #[error("invalid vertex: {0}")]
    InvalidVertex(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("graph violates {} invariant(s): {}", .0.len(), join_violations(.0))]
    Semantic(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A broken [`PortLabeledGraph`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NeighborOutOfRange { node: NodeId, neighbor: NodeId },
    SelfLoop { node: NodeId },
    ParallelEdge { node: NodeId, neighbor: NodeId },
    /// `from` lists `to` but `to` does not list `from`.
    Asymmetric { from: NodeId, to: NodeId },
    /// `node` is not reachable from node 0.
    Disconnected { node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "graph has no nodes"),
            Violation::NeighborOutOfRange { node, neighbor } => {
                write!(f, "node {node} lists nonexistent neighbor {neighbor}")
            }
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::ParallelEdge { node, neighbor } => {
                write!(f, "parallel edge: node {node} lists neighbor {neighbor} more than once")
            }
            Violation::Asymmetric { from, to } => {
                write!(f, "asymmetric edge: node {from} lists {to} but {to} does not list {from}")
            }
            Violation::Disconnected { node } => {
                write!(f, "disconnected: node {node} unreachable from node 0")
            }
        }
    }
}

/// Per-node ordered neighbor lists; entry `p - 1` of node `v` is the neighbor
/// reached through outport `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortLabeledGraph {
    ports: Vec<Vec<NodeId>>,
}

impl PortLabeledGraph {
    /// Builds a graph and rejects it unless every invariant holds.
    pub fn from_ports(ports: Vec<Vec<NodeId>>) -> Result<Self, GraphError> {
        let g = Self { ports };
        let violations = g.validate();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(GraphError::Semantic(violations))
        }
    }

    /// Builds a graph without checking it. Only [`validate`](Self::validate)
    /// is meaningful on the result until it has been checked.
    pub fn from_ports_unchecked(ports: Vec<Vec<NodeId>>) -> Self {
        Self { ports }
    }

    pub fn node_count(&self) -> usize {
        self.ports.len()
    }

    pub fn edge_count(&self) -> usize {
        self.ports.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.ports[v].len()
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.ports[v]
    }

    pub fn port_map(&self) -> &[Vec<NodeId>] {
        &self.ports
    }

    /// Neighbor of `v` behind outport `port`, if that port exists.
    pub fn neighbor_via_port(&self, v: NodeId, port: Port) -> Option<NodeId> {
        port.checked_sub(1).and_then(|i| self.ports.get(v)?.get(i).copied())
    }

    /// Port at `u` leading to `v`, if they are adjacent.
    pub fn port_to(&self, u: NodeId, v: NodeId) -> Option<Port> {
        self.ports.get(u)?.iter().position(|&w| w == v).map(|i| i + 1)
    }

    /// All invariant violations; empty iff the graph is a connected simple
    /// graph with symmetric port maps.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.ports.len();
        if n == 0 {
            return vec![Violation::Empty];
        }
        let mut out = Vec::new();
        let mut structural = false;
        for (v, list) in self.ports.iter().enumerate() {
            let mut seen = HashSet::with_capacity(list.len());
            for &u in list {
                if u >= n {
                    out.push(Violation::NeighborOutOfRange { node: v, neighbor: u });
                    structural = true;
                    continue;
                }
                if u == v {
                    out.push(Violation::SelfLoop { node: v });
                    structural = true;
                }
                if !seen.insert(u) {
                    out.push(Violation::ParallelEdge { node: v, neighbor: u });
                    structural = true;
                }
            }
        }
        for (v, list) in self.ports.iter().enumerate() {
            for &u in list {
                if u < n && u != v && !self.ports[u].contains(&v) {
                    out.push(Violation::Asymmetric { from: v, to: u });
                    structural = true;
                }
            }
        }
        if !structural {
            let dist = self.bfs_distances(0);
            for (v, d) in dist.iter().enumerate() {
                if d.is_none() {
                    out.push(Violation::Disconnected { node: v });
                }
            }
        }
        out
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let n = self.ports.len();
        let mut dist = vec![None; n];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].unwrap();
            for &u in &self.ports[v] {
                if u < n && dist[u].is_none() {
                    dist[u] = Some(dv + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Exact diameter by breadth-first search from every node.
    pub fn diameter(&self) -> usize {
        (0..self.node_count())
            .map(|s| {
                self.bfs_distances(s)
                    .into_iter()
                    .map(|d| d.expect("diameter of a disconnected graph"))
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Renames node `v` to `perm[v]`, carrying port maps along.
    pub fn relabel(&self, perm: &[NodeId]) -> PortLabeledGraph {
        assert_eq!(perm.len(), self.node_count());
        let mut ports = vec![Vec::new(); self.node_count()];
        for (v, list) in self.ports.iter().enumerate() {
            ports[perm[v]] = list.iter().map(|&u| perm[u]).collect();
        }
        PortLabeledGraph { ports }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphFile {
            n: self.node_count(),
            ports: self.ports.clone(),
        })
        .expect("graph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.ports.len() != file.n {
            return Err(GraphError::Parse {
                line: 1,
                column: 1,
                message: format!(
                    "field `ports`: expected {} node entries, found {}",
                    file.n,
                    file.ports.len()
                ),
            });
        }
        Self::from_ports(file.ports)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    ports: Vec<Vec<NodeId>>,
}

/// Port choices for the internal nodes of a path `v_1 - v_2 - ... - v_n`.
///
/// Entry `i - 2` is the label, at `v_i`, of the arc `v_i -> v_{i+1}` (away
/// from the target endpoint `v_1`). The other port of `v_i` leads to `v_{i-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathLabeling {
    toward_far: Vec<Port>,
}

impl PathLabeling {
    pub fn new(n: usize, toward_far: Vec<Port>) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::InvalidSize(format!("path needs at least 2 nodes, got {n}")));
        }
        if toward_far.len() != n - 2 {
            return Err(GraphError::InvalidSize(format!(
                "path of {n} nodes needs {} labels, got {}",
                n - 2,
                toward_far.len()
            )));
        }
        if let Some(bad) = toward_far.iter().find(|&&p| p != 1 && p != 2) {
            return Err(GraphError::InvalidPort(format!("path port {bad} not in {{1,2}}")));
        }
        Ok(Self { toward_far })
    }

    pub fn node_count(&self) -> usize {
        self.toward_far.len() + 2
    }

    /// Port at internal node `v_i` (1-based, `2 <= i <= n-1`) toward `v_{i+1}`.
    pub fn toward_far(&self, i: usize) -> Port {
        self.toward_far[i - 2]
    }

    pub fn labels(&self) -> &[Port] {
        &self.toward_far
    }
}

/// Path with `v_i` stored as node `i - 1`; `v_1` is node 0 and `v_n` is node `n - 1`.
pub fn build_path(labeling: &PathLabeling) -> PortLabeledGraph {
    let n = labeling.node_count();
    let mut ports = Vec::with_capacity(n);
    ports.push(vec![1]);
    for i in 2..n {
        let (prev, next) = (i - 2, i);
        ports.push(if labeling.toward_far(i) == 1 {
            vec![next, prev]
        } else {
            vec![prev, next]
        });
    }
    ports.push(vec![n - 2]);
    PortLabeledGraph { ports }
}

/// The clique `K_d` with one pendant per clique node, every pendant behind
/// port `p`. Clique nodes are `0..d`; the pendant of clique node `k` is `d + k`.
/// The remaining ports of a clique node go to its clique neighbors in
/// increasing id order.
pub fn build_clique_pendant(d: usize, p: Port) -> Result<PortLabeledGraph, GraphError> {
    if d < 2 {
        return Err(GraphError::InvalidSize(format!("clique size must be at least 2, got {d}")));
    }
    if p == 0 || p > d {
        return Err(GraphError::InvalidPort(format!("port {p} outside 1..={d}")));
    }
    let mut ports = Vec::with_capacity(2 * d);
    for k in 0..d {
        let mut list: Vec<NodeId> = (0..d).filter(|&j| j != k).collect();
        list.insert(p - 1, d + k);
        ports.push(list);
    }
    for k in 0..d {
        ports.push(vec![k]);
    }
    Ok(PortLabeledGraph { ports })
}

/// Replaces the pendant of clique node `v_star` by a path of
/// `labeling.node_count() - 1` new nodes.
///
/// `labeling` describes a path whose `v_n` endpoint is `v_star` itself: the
/// node that took the pendant's place is `v_{n-1}` (called `v_f`), and the
/// far end `v_1` is the node the agent must eventually reach. Every attached
/// node except `v_1` has an entry in `labeling`, so `v_f`'s port back to
/// `v_star` is `labeling.toward_far(n - 1)`.
///
/// Ids: `v_f` reuses the removed pendant's id `d + v_star`; the remaining path
/// nodes `v_{n-2}, ..., v_1` get ids `2d, 2d + 1, ...`, so `v_1` is the
/// highest id. Ids of all other nodes are unchanged.
pub fn replace_pendant_with_path(
    g1: &PortLabeledGraph,
    v_star: NodeId,
    labeling: &PathLabeling,
) -> Result<PortLabeledGraph, GraphError> {
    let total = g1.node_count();
    let d = total / 2;
    let pendant = d + v_star;
    let is_clique_pendant = total.is_multiple_of(2)
        && d >= 2
        && v_star < d
        && g1.degree(v_star) == d
        && g1.neighbors(pendant) == [v_star];
    if !is_clique_pendant {
        return Err(GraphError::InvalidVertex(format!(
            "node {v_star} is not a clique node of a clique-with-pendants graph"
        )));
    }
    let attached = labeling.node_count() - 1;
    if attached < d + 1 {
        return Err(GraphError::InvalidSize(format!(
            "attached path must have at least {} nodes, got {attached}",
            d + 1
        )));
    }

    // Path position i (1-based, v_1 .. v_attached) to node id.
    let id_of = |i: usize| -> NodeId {
        if i == attached {
            pendant
        } else {
            2 * d + (attached - 1 - i)
        }
    };
    let mut ports = g1.ports.clone();
    ports.resize(total + attached - 1, Vec::new());
    for i in 1..=attached {
        let prev = (i > 1).then(|| id_of(i - 1));
        let next = if i == attached { v_star } else { id_of(i + 1) };
        ports[id_of(i)] = match prev {
            None => vec![next],
            Some(prev) if labeling.toward_far(i) == 1 => vec![next, prev],
            Some(prev) => vec![prev, next],
        };
    }
    Ok(PortLabeledGraph { ports })
}

/// Connected simple graph with `n` nodes and `m` edges: a random recursive
/// spanning tree plus uniformly chosen extra edges, with ports shuffled at
/// every node. Deterministic in `seed`.
pub fn random_connected_graph(n: usize, m: usize, seed: u64) -> Result<PortLabeledGraph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidSize("graph needs at least one node".into()));
    }
    let max_m = n * (n - 1) / 2;
    if m + 1 < n || m > max_m {
        return Err(GraphError::InvalidSize(format!(
            "{m} edges infeasible for a connected simple graph on {n} nodes (need {}..={max_m})",
            n - 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut present = HashSet::with_capacity(m);
    let mut add = |adj: &mut Vec<Vec<NodeId>>, a: NodeId, b: NodeId| {
        adj[a].push(b);
        adj[b].push(a);
        present.insert((a.min(b), a.max(b)));
    };
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        add(&mut adj, order[i], parent);
    }
    let extra = m - (n - 1);
    if extra > 0 {
        let mut candidates: Vec<(NodeId, NodeId)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|e| !present.contains(e))
            .collect();
        let (chosen, _) = candidates.partial_shuffle(&mut rng, extra);
        for &(a, b) in chosen.iter() {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for list in &mut adj {
        list.shuffle(&mut rng);
    }
    Ok(PortLabeledGraph { ports: adj })
}

//! Mixed graphs (DAGs, CPDAGs and reconstruction graphs) and the graph
//! algorithms the correction search relies on.
//!
//! Nodes are stored in insertion order and addressed internally by index;
//! the public, label-based API resolves names through an index map.
//! Adjacency is kept symmetric: each endpoint stores a [`Mark`] describing
//! the edge from its own point of view.

mod cpdag;
mod dsep;
mod text;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cpdag::{acyclic_orientation, consistent_extension, cpdag_to_dag, dag_to_cpdag, meek_closure};
pub use dsep::{d_separated, d_separated_idx};
pub use text::{parse_graph, read_graph, write_graph};

/// Node label. Equality is by label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty()
            || label.chars().any(char::is_whitespace)
            || label.contains("->")
            || label.contains("--")
            || label.contains(',')
        {
            return Err(Error::InvalidLabel(label));
        }
        Ok(NodeId(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Directed,
    Undirected,
}

/// An edge between two labelled nodes. Directed edges point `a -> b`;
/// undirected edges are stored with `a < b` so that `(a, b)` and `(b, a)`
/// compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub orientation: Orientation,
}

impl Edge {
    pub fn directed(a: NodeId, b: NodeId) -> Self {
        Edge { a, b, orientation: Orientation::Directed }
    }

    pub fn undirected(a: NodeId, b: NodeId) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Edge { a, b, orientation: Orientation::Undirected }
    }

    /// The endpoints as a sorted pair, ignoring orientation.
    pub fn pair(&self) -> (NodeId, NodeId) {
        if self.a <= self.b {
            (self.a.clone(), self.b.clone())
        } else {
            (self.b.clone(), self.a.clone())
        }
    }

    pub fn touches(&self, v: &NodeId) -> bool {
        &self.a == v || &self.b == v
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.orientation {
            Orientation::Directed => write!(f, "{} -> {}", self.a, self.b),
            Orientation::Undirected => write!(f, "{} -- {}", self.a, self.b),
        }
    }
}

/// How an edge looks from one of its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    /// `self -> other`
    Out,
    /// `other -> self`
    In,
    /// `self -- other`
    Undirected,
}

/// Nodes plus directed and undirected edges, at most one edge per pair.
#[derive(Debug, Clone, Default)]
pub struct MixedGraph {
    names: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    adj: Vec<BTreeMap<usize, Mark>>,
}

impl PartialEq for MixedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.node_set() == other.node_set() && self.edge_set() == other.edge_set()
    }
}

impl Eq for MixedGraph {}

impl MixedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut g = Self::new();
        for l in labels {
            g.add_node(l)?;
        }
        Ok(g)
    }

    /// Adds a node and returns its index. Fails on an invalid or duplicate label.
    pub fn add_node(&mut self, label: impl Into<String>) -> Result<usize> {
        let id = NodeId::new(label)?;
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateNode(id.0));
        }
        let i = self.names.len();
        self.index.insert(id.clone(), i);
        self.names.push(id);
        self.adj.push(BTreeMap::new());
        Ok(i)
    }

    /// Index of `label`, adding the node if missing.
    pub fn ensure_node(&mut self, label: &str) -> Result<usize> {
        match self.index.get(label) {
            Some(&i) => Ok(i),
            None => self.add_node(label),
        }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.names
    }

    pub fn node_set(&self) -> BTreeSet<NodeId> {
        self.names.iter().cloned().collect()
    }

    pub fn name(&self, i: usize) -> &NodeId {
        &self.names[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label).ok_or_else(|| Error::NodeNotFound(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::InvalidEdge(self.names[a].0.clone(), self.names[b].0.clone(), "self-loop"));
        }
        if self.adj[a].contains_key(&b) {
            return Err(Error::InvalidEdge(self.names[a].0.clone(), self.names[b].0.clone(), "pair already adjacent"));
        }
        Ok(())
    }

    pub fn add_directed(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_pair(from, to)?;
        self.adj[from].insert(to, Mark::Out);
        self.adj[to].insert(from, Mark::In);
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        self.adj[a].insert(b, Mark::Undirected);
        self.adj[b].insert(a, Mark::Undirected);
        Ok(())
    }

    /// Adds an edge by labels, creating missing nodes.
    pub fn add_edge(&mut self, edge: &Edge) -> Result<()> {
        let a = self.ensure_node(edge.a.as_str())?;
        let b = self.ensure_node(edge.b.as_str())?;
        match edge.orientation {
            Orientation::Directed => self.add_directed(a, b),
            Orientation::Undirected => self.add_undirected(a, b),
        }
    }

    /// Removes whatever edge joins `a` and `b`; returns its mark as seen from `a`.
    pub fn remove_pair(&mut self, a: usize, b: usize) -> Option<Mark> {
        let m = self.adj[a].remove(&b)?;
        self.adj[b].remove(&a);
        Some(m)
    }

    /// Replaces the edge between `a` and `b` (adjacent) with `a -> b`.
    pub fn orient(&mut self, a: usize, b: usize) {
        debug_assert!(self.adj[a].contains_key(&b));
        self.adj[a].insert(b, Mark::Out);
        self.adj[b].insert(a, Mark::In);
    }

    pub fn mark(&self, a: usize, b: usize) -> Option<Mark> {
        self.adj[a].get(&b).copied()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains_key(&b)
    }

    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == Some(Mark::Out)
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == Some(Mark::Undirected)
    }

    /// Indices adjacent to `v` by any edge, ascending.
    pub fn adjacent_idx(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].keys().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn parents_idx(&self, v: usize) -> Vec<usize> {
        self.adj[v].iter().filter(|(_, m)| **m == Mark::In).map(|(&u, _)| u).collect()
    }

    pub fn children_idx(&self, v: usize) -> Vec<usize> {
        self.adj[v].iter().filter(|(_, m)| **m == Mark::Out).map(|(&u, _)| u).collect()
    }

    pub fn undirected_idx(&self, v: usize) -> Vec<usize> {
        self.adj[v].iter().filter(|(_, m)| **m == Mark::Undirected).map(|(&u, _)| u).collect()
    }

    /// All adjacent nodes of `v`, regardless of orientation.
    pub fn neighbors(&self, v: &str) -> Result<BTreeSet<NodeId>> {
        let i = self.require(v)?;
        Ok(self.adjacent_idx(i).map(|u| self.names[u].clone()).collect())
    }

    pub fn parents(&self, v: &str) -> Result<Vec<NodeId>> {
        let i = self.require(v)?;
        Ok(self.parents_idx(i).into_iter().map(|u| self.names[u].clone()).collect())
    }

    pub fn children(&self, v: &str) -> Result<Vec<NodeId>> {
        let i = self.require(v)?;
        Ok(self.children_idx(i).into_iter().map(|u| self.names[u].clone()).collect())
    }

    /// Index-level edge list: `(u, v, Directed)` means `u -> v`,
    /// `(u, v, Undirected)` has `u < v`. Sorted by `(min, max)` index pair.
    pub fn edge_list(&self) -> Vec<(usize, usize, Orientation)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, row) in self.adj.iter().enumerate() {
            for (&v, &m) in row.range(u + 1..) {
                match m {
                    Mark::Out => out.push((u, v, Orientation::Directed)),
                    Mark::In => out.push((v, u, Orientation::Directed)),
                    Mark::Undirected => out.push((u, v, Orientation::Undirected)),
                }
            }
        }
        out
    }

    pub fn edge_at(&self, u: usize, v: usize) -> Option<Edge> {
        let a = self.names[u].clone();
        let b = self.names[v].clone();
        match self.mark(u, v)? {
            Mark::Out => Some(Edge::directed(a, b)),
            Mark::In => Some(Edge::directed(b, a)),
            Mark::Undirected => Some(Edge::undirected(a, b)),
        }
    }

    /// Labelled edge set.
    pub fn edges(&self) -> Vec<Edge> {
        self.edge_list()
            .into_iter()
            .map(|(u, v, o)| match o {
                Orientation::Directed => Edge::directed(self.names[u].clone(), self.names[v].clone()),
                Orientation::Undirected => Edge::undirected(self.names[u].clone(), self.names[v].clone()),
            })
            .collect()
    }

    pub fn edge_set(&self) -> BTreeSet<Edge> {
        self.edges().into_iter().collect()
    }

    /// Looks up the edge joining the two labelled nodes.
    pub fn find_edge(&self, a: &str, b: &str) -> Option<Edge> {
        let (u, v) = (self.index_of(a)?, self.index_of(b)?);
        self.edge_at(u, v)
    }

    pub fn remove_edge(&mut self, a: &str, b: &str) -> Result<Edge> {
        let (u, v) = (self.require(a)?, self.require(b)?);
        let e = self.edge_at(u, v).ok_or_else(|| Error::EdgeNotFound(a.to_string(), b.to_string()))?;
        self.remove_pair(u, v);
        Ok(e)
    }

    pub fn has_undirected(&self) -> bool {
        self.adj.iter().any(|row| row.values().any(|m| *m == Mark::Undirected))
    }

    /// Topological order of the directed part, or `None` if it has a cycle.
    /// Ties resolve to the smallest index.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.node_count();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents_idx(v).len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in self.children_idx(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn directed_part_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    pub fn is_dag(&self) -> bool {
        !self.has_undirected() && self.directed_part_acyclic()
    }

    /// True if a directed path `from ~> to` exists (length ≥ 1).
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for c in self.children_idx(u) {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        false
    }

    /// Copy of the graph restricted to the skeleton, all edges undirected.
    pub fn skeleton(&self) -> MixedGraph {
        let mut g = self.clone();
        for row in &mut g.adj {
            for m in row.values_mut() {
                *m = Mark::Undirected;
            }
        }
        g
    }

    /// Unshielded colliders `a -> c <- b` (with `a < b`) among directed edges.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.node_count() {
            let pa = self.parents_idx(c);
            for (i, &a) in pa.iter().enumerate() {
                for &b in &pa[i + 1..] {
                    if !self.adjacent(a, b) {
                        out.insert((a.min(b), a.max(b), c));
                    }
                }
            }
        }
        out
    }
}

/// All triples of pairwise-adjacent nodes, as ascending index triples.
pub fn find_3_cliques_idx(g: &MixedGraph) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for u in 0..g.node_count() {
        for v in g.adjacent_idx(u).filter(|&v| v > u) {
            for w in g.adjacent_idx(v).filter(|&w| w > v) {
                if g.adjacent(u, w) {
                    out.push([u, v, w]);
                }
            }
        }
    }
    out
}

/// All 3-vertex cliques, orientation ignored. Each triple is sorted by label.
pub fn find_3_cliques(g: &MixedGraph) -> BTreeSet<[NodeId; 3]> {
    find_3_cliques_idx(g)
        .into_iter()
        .map(|t| {
            let mut names = t.map(|i| g.name(i).clone());
            names.sort();
            names
        })
        .collect()
}

/// Label used for the noisy observed image of `v`.
pub fn noisy_label(v: &NodeId) -> String {
    format!("{v}^o")
}

/// Adds a child `v^o` with the single edge `v -> v^o` for every `v` in `noisy`.
pub fn augment_with_noisy_children(g: &MixedGraph, noisy: &BTreeSet<NodeId>) -> Result<MixedGraph> {
    let mut out = g.clone();
    for v in noisy {
        let i = g.require(v.as_str())?;
        let o = out.add_node(noisy_label(v))?;
        out.add_directed(i, o)?;
    }
    Ok(out)
}

//! Plain-text graph format: one edge per line (`A -> B` or `A -- B`),
//! `node A` for isolated nodes, `#` comments.

use std::fmt::Write as _;
use std::path::Path;

use super::{Edge, MixedGraph, NodeId, Orientation};
use crate::error::{Error, Result};

pub fn parse_graph(text: &str) -> Result<MixedGraph> {
    let mut g = MixedGraph::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::ParseError { line: lineno + 1, msg: msg.to_string() };
        if let Some(rest) = line.strip_prefix("node ") {
            let name = rest.trim();
            NodeId::new(name).map_err(|_| err("invalid node label"))?;
            g.ensure_node(name)?;
            continue;
        }
        let (a, b, orientation) = if let Some((a, b)) = line.split_once("->") {
            (a, b, Orientation::Directed)
        } else if let Some((a, b)) = line.split_once("--") {
            (a, b, Orientation::Undirected)
        } else {
            return Err(err("expected `A -> B`, `A -- B` or `node A`"));
        };
        let a = NodeId::new(a.trim()).map_err(|_| err("invalid node label"))?;
        let b = NodeId::new(b.trim()).map_err(|_| err("invalid node label"))?;
        let edge = match orientation {
            Orientation::Directed => Edge::directed(a, b),
            Orientation::Undirected => Edge::undirected(a, b),
        };
        g.add_edge(&edge).map_err(|e| err(&e.to_string()))?;
    }
    Ok(g)
}

/// Serializes every node as a `node` line (keeping node order), then the edges.
pub fn write_graph(g: &MixedGraph) -> String {
    let mut out = String::new();
    for v in g.nodes() {
        let _ = writeln!(out, "node {v}");
    }
    for e in g.edges() {
        let _ = writeln!(out, "{e}");
    }
    out
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<MixedGraph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

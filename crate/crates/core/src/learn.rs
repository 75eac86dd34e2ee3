//! Greedy BIC hill climbing and import/export of externally learned graphs.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Variable};
use crate::error::{Error, Result};
use crate::graph::{parse_graph, write_graph, MixedGraph};
use crate::score::FamilyCache;

/// Smallest score gain that counts as an improvement.
const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HcConfig {
    pub max_parents: usize,
    pub max_iterations: usize,
    /// Permutes the node order that breaks ties between equal moves.
    pub seed: u64,
}

impl Default for HcConfig {
    fn default() -> Self {
        HcConfig { max_parents: 4, max_iterations: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

#[derive(Debug, Clone)]
pub struct HcResult {
    pub graph: MixedGraph,
    /// Total BIC after each accepted move, starting with the empty graph.
    pub trace: Vec<f64>,
}

pub fn hill_climb(data: &Dataset, cfg: &HcConfig) -> Result<MixedGraph> {
    Ok(hill_climb_trace(data, cfg)?.graph)
}

/// Add/delete/reverse hill climbing from the empty graph over the dataset's
/// columns, keeping the graph acyclic and in-degrees within `max_parents`.
pub fn hill_climb_trace(data: &Dataset, cfg: &HcConfig) -> Result<HcResult> {
    if data.n_rows() == 0 {
        return Err(Error::InvalidArgument("hill climbing needs at least one record".into()));
    }
    let n = data.variables().len();
    let mut g = MixedGraph::with_nodes(data.variables().iter().map(|v| v.name.as_str().to_string()))?;
    let mut cache = FamilyCache::new();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut fam: Vec<f64> = (0..n).map(|v| cache.family_bic(data, v, &[])).collect();
    let mut trace = vec![fam.iter().sum::<f64>()];

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let with = |ps: &[usize], x: usize| {
        let mut v = ps.to_vec();
        v.push(x);
        v.sort_unstable();
        v
    };
    let without = |ps: &[usize], x: usize| ps.iter().copied().filter(|&p| p != x).collect::<Vec<_>>();

    for _ in 0..cfg.max_iterations {
        let mut best: Option<(f64, Move)> = None;
        let mut consider = |gain: f64, m: Move| {
            if gain > MIN_GAIN && best.is_none_or(|(b, _)| gain > b + MIN_GAIN) {
                best = Some((gain, m));
            }
        };
        for &i in &order {
            for &j in &order {
                if i == j {
                    continue;
                }
                if g.is_directed(i, j) {
                    let gain = cache.family_bic(data, j, &without(&parents[j], i)) - fam[j];
                    consider(gain, Move::Delete(i, j));
                    if parents[i].len() < cfg.max_parents && !path_avoiding_edge(&g, i, j) {
                        let gain = cache.family_bic(data, j, &without(&parents[j], i)) - fam[j]
                            + cache.family_bic(data, i, &with(&parents[i], j))
                            - fam[i];
                        consider(gain, Move::Reverse(i, j));
                    }
                } else if !g.adjacent(i, j) && parents[j].len() < cfg.max_parents && !g.has_directed_path(j, i) {
                    let gain = cache.family_bic(data, j, &with(&parents[j], i)) - fam[j];
                    consider(gain, Move::Add(i, j));
                }
            }
        }
        let Some((gain, m)) = best else { break };
        match m {
            Move::Add(i, j) => {
                g.add_directed(i, j)?;
                parents[j] = with(&parents[j], i);
            }
            Move::Delete(i, j) => {
                g.remove_pair(i, j);
                parents[j] = without(&parents[j], i);
            }
            Move::Reverse(i, j) => {
                g.remove_pair(i, j);
                g.add_directed(j, i)?;
                parents[j] = without(&parents[j], i);
                parents[i] = with(&parents[i], j);
            }
        }
        for v in [m_from(m), m_to(m)] {
            fam[v] = cache.family_bic(data, v, &parents[v]);
        }
        let total = fam.iter().sum::<f64>();
        debug_assert!((total - trace.last().unwrap() - gain).abs() < 1e-6 * total.abs().max(1.0));
        trace.push(total);
    }
    Ok(HcResult { graph: g, trace })
}

fn m_from(m: Move) -> usize {
    match m {
        Move::Add(i, _) | Move::Delete(i, _) | Move::Reverse(i, _) => i,
    }
}

fn m_to(m: Move) -> usize {
    match m {
        Move::Add(_, j) | Move::Delete(_, j) | Move::Reverse(_, j) => j,
    }
}

/// Whether a directed path `from ~> to` exists without the edge `from -> to`.
fn path_avoiding_edge(g: &MixedGraph, from: usize, to: usize) -> bool {
    let mut seen = vec![false; g.node_count()];
    let mut stack: Vec<usize> = g.children_idx(from).into_iter().filter(|&c| c != to).collect();
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if !std::mem::replace(&mut seen[v], true) {
            stack.extend(g.children_idx(v));
        }
    }
    false
}

/// Parses a graph file whose nodes must all belong to `schema`.
pub fn import_graph_str(text: &str, schema: &[Variable]) -> Result<MixedGraph> {
    let g = parse_graph(text)?;
    for v in g.nodes() {
        if !schema.iter().any(|s| s.name == *v) {
            return Err(Error::NodeNotFound(v.to_string()));
        }
    }
    if !g.directed_part_acyclic() {
        return Err(Error::NotADag);
    }
    Ok(g)
}

pub fn import_graph(path: impl AsRef<Path>, schema: &[Variable]) -> Result<MixedGraph> {
    import_graph_str(&std::fs::read_to_string(path)?, schema)
}

pub fn export_graph(g: &MixedGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_graph(g))?;
    Ok(())
}

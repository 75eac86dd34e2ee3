//! Structural accuracy of a learned graph against the true CPDAG.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{find_3_cliques_idx, Mark, MixedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub shd: usize,
    pub cliques_learned: usize,
    pub cliques_true: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Status of the pair `(a, b)` as seen from `a`, with absence as `None`.
fn status(g: &MixedGraph, a: usize, b: usize) -> Option<Mark> {
    g.mark(a, b)
}

/// Counts matches between `learned` and `truth`. An edge is a true positive
/// only if both graphs join the pair the same way (same direction, or
/// undirected in both).
pub fn compare_cpdags(learned: &MixedGraph, truth: &MixedGraph) -> Result<EvalReport> {
    if learned.node_set() != truth.node_set() {
        return Err(Error::SchemaMismatch("learned and true graphs have different nodes".into()));
    }
    // truth index -> learned index
    let map: Vec<usize> = truth.nodes().iter().map(|n| learned.index_of(n.as_str()).unwrap()).collect();
    let n = truth.node_count();
    let (mut tp, mut shd) = (0, 0);
    for a in 0..n {
        for b in a + 1..n {
            let t = status(truth, a, b);
            let l = status(learned, map[a], map[b]);
            if t != l {
                shd += 1;
            } else if t.is_some() {
                tp += 1;
            }
        }
    }
    let fp = learned.edge_count() - tp;
    let fn_ = truth.edge_count() - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        shd,
        cliques_learned: clique_count(learned),
        cliques_true: clique_count(truth),
    })
}

/// Number of 3-vertex cliques, orientation ignored.
pub fn clique_count(g: &MixedGraph) -> usize {
    find_3_cliques_idx(g).len()
}

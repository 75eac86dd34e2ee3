//! d-separation via the ancestral moral graph.

use std::collections::VecDeque;

use super::MixedGraph;
use crate::error::{Error, Result};

/// `x` and `y` are d-separated by `z` in DAG `g`.
pub fn d_separated(g: &MixedGraph, x: &str, y: &str, z: &[&str]) -> Result<bool> {
    if !g.is_dag() {
        return Err(Error::NotADag);
    }
    let xi = g.require(x)?;
    let yi = g.require(y)?;
    let zi = z.iter().map(|v| g.require(v)).collect::<Result<Vec<_>>>()?;
    if xi == yi || zi.contains(&xi) || zi.contains(&yi) {
        return Err(Error::InvalidArgument("x, y must be distinct and outside z".into()));
    }
    Ok(d_separated_idx(g, xi, yi, &zi))
}

/// Index-level d-separation; the caller guarantees `g` is a DAG.
///
/// Restricts to ancestors of `{x, y} ∪ z`, moralizes, deletes `z` and checks
/// whether `x` still reaches `y`.
pub fn d_separated_idx(g: &MixedGraph, x: usize, y: usize, z: &[usize]) -> bool {
    let n = g.node_count();
    let mut in_anc = vec![false; n];
    let mut stack: Vec<usize> = z.iter().copied().chain([x, y]).collect();
    while let Some(v) = stack.pop() {
        if in_anc[v] {
            continue;
        }
        in_anc[v] = true;
        stack.extend(g.parents_idx(v));
    }

    let mut moral: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in (0..n).filter(|&v| in_anc[v]) {
        let pa = g.parents_idx(v);
        for (i, &p) in pa.iter().enumerate() {
            moral[p].push(v);
            moral[v].push(p);
            for &q in &pa[i + 1..] {
                moral[p].push(q);
                moral[q].push(p);
            }
        }
    }

    let mut blocked = vec![false; n];
    for &v in z {
        blocked[v] = true;
    }
    let mut seen = vec![false; n];
    seen[x] = true;
    let mut queue = VecDeque::from([x]);
    while let Some(u) = queue.pop_front() {
        for &w in &moral[u] {
            if w == y {
                return false;
            }
            if !seen[w] && !blocked[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    true
}

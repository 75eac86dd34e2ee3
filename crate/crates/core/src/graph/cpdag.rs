//! Markov equivalence classes: DAG -> CPDAG via v-structures and Meek's
//! rules, and CPDAG/PDAG -> DAG extensions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mark, MixedGraph};
use crate::error::{Error, Result};

/// Completed partially directed graph of the equivalence class of `dag`.
pub fn dag_to_cpdag(dag: &MixedGraph) -> Result<MixedGraph> {
    if !dag.is_dag() {
        return Err(Error::NotADag);
    }
    let mut g = dag.skeleton();
    for (a, b, c) in dag.v_structures() {
        g.orient(a, c);
        g.orient(b, c);
    }
    meek_closure(&mut g);
    Ok(g)
}

/// Applies Meek rules 1-4 until no undirected edge can be oriented.
pub fn meek_closure(g: &mut MixedGraph) {
    loop {
        let mut changed = false;
        for (a, b) in undirected_pairs(g) {
            if !g.is_undirected(a, b) {
                continue;
            }
            if compelled(g, a, b) {
                g.orient(a, b);
                changed = true;
            } else if compelled(g, b, a) {
                g.orient(b, a);
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

fn undirected_pairs(g: &MixedGraph) -> Vec<(usize, usize)> {
    g.edge_list().into_iter().filter(|e| e.2 == super::Orientation::Undirected).map(|(a, b, _)| (a, b)).collect()
}

/// Whether one of Meek's rules forces the undirected edge `a -- b` into `a -> b`.
fn compelled(g: &MixedGraph, a: usize, b: usize) -> bool {
    let pa_a = g.parents_idx(a);
    // R1: c -> a -- b, c and b nonadjacent
    if pa_a.iter().any(|&c| c != b && !g.adjacent(c, b)) {
        return true;
    }
    // R2: a -> c -> b
    if g.children_idx(a).iter().any(|&c| g.is_directed(c, b)) {
        return true;
    }
    let und_a = g.undirected_idx(a);
    let pa_b = g.parents_idx(b);
    // R3: a -- c -> b, a -- d -> b, c and d nonadjacent
    let into_b: Vec<usize> = und_a.iter().copied().filter(|c| pa_b.contains(c)).collect();
    for (i, &c) in into_b.iter().enumerate() {
        if into_b[i + 1..].iter().any(|&d| !g.adjacent(c, d)) {
            return true;
        }
    }
    // R4: a -- c -> d -> b, a adjacent to d, c and b nonadjacent
    for &c in und_a.iter().filter(|&&c| c != b && !g.adjacent(c, b)) {
        for d in g.children_idx(c) {
            if d != a && g.adjacent(a, d) && g.is_directed(d, b) {
                return true;
            }
        }
    }
    false
}

/// Seeded member of the equivalence class represented by `cpdag`.
///
/// Undirected edges are visited in a seeded random order; each is oriented
/// in a seeded direction (falling back to the other one) such that, after
/// re-closing under Meek's rules, the directed part stays acyclic and no new
/// v-structure appears.
pub fn cpdag_to_dag(cpdag: &MixedGraph, seed: u64) -> Result<MixedGraph> {
    if !cpdag.directed_part_acyclic() {
        return Err(Error::NotExtendable);
    }
    let target = cpdag.v_structures();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = undirected_pairs(cpdag);
    order.shuffle(&mut rng);
    let mut g = cpdag.clone();
    for (a, b) in order {
        if !g.is_undirected(a, b) {
            continue;
        }
        let (first, second) = if rng.gen_bool(0.5) { ((a, b), (b, a)) } else { ((b, a), (a, b)) };
        let mut done = false;
        for (u, v) in [first, second] {
            let mut trial = g.clone();
            trial.orient(u, v);
            meek_closure(&mut trial);
            if trial.directed_part_acyclic() && trial.v_structures() == target {
                g = trial;
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::NotExtendable);
        }
    }
    debug_assert!(g.is_dag());
    Ok(g)
}

/// Consistent extension of an arbitrary partially directed graph
/// (Dor & Tarsi sink elimination). Among eligible sinks one is picked at
/// random from `seed`.
pub fn consistent_extension(pdag: &MixedGraph, seed: u64) -> Result<MixedGraph> {
    let n = pdag.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = pdag.clone();
    let mut out = pdag.clone();
    let mut alive = vec![true; n];
    for _ in 0..n {
        let sinks: Vec<usize> = (0..n).filter(|&x| alive[x] && is_removable_sink(&work, x)).collect();
        let &x = sinks.choose(&mut rng).ok_or(Error::NotExtendable)?;
        for y in work.undirected_idx(x) {
            out.orient(y, x);
        }
        for y in work.adjacent_idx(x).collect::<Vec<_>>() {
            work.remove_pair(x, y);
        }
        alive[x] = false;
    }
    Ok(out)
}

fn is_removable_sink(g: &MixedGraph, x: usize) -> bool {
    if !g.children_idx(x).is_empty() {
        return false;
    }
    let adj: Vec<usize> = g.adjacent_idx(x).collect();
    g.undirected_idx(x).into_iter().all(|y| adj.iter().all(|&z| z == y || g.adjacent(y, z)))
}

/// Orients every undirected edge along a seeded topological order of the
/// directed part. Always succeeds when the directed part is acyclic, but may
/// introduce new v-structures.
pub fn acyclic_orientation(pdag: &MixedGraph, seed: u64) -> Result<MixedGraph> {
    let n = pdag.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indeg: Vec<usize> = (0..n).map(|v| pdag.parents_idx(v).len()).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut pos = vec![usize::MAX; n];
    let mut k = 0;
    while !ready.is_empty() {
        let v = ready.swap_remove(rng.gen_range(0..ready.len()));
        pos[v] = k;
        k += 1;
        for c in pdag.children_idx(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.push(c);
            }
        }
    }
    if k < n {
        return Err(Error::NotADag);
    }
    let mut out = pdag.clone();
    for (a, b) in undirected_pairs(pdag) {
        if pos[a] < pos[b] {
            out.orient(a, b);
        } else {
            out.orient(b, a);
        }
    }
    Ok(out)
}

impl MixedGraph {
    /// A DAG with the same skeleton for scoring: `self` if already a DAG,
    /// else a consistent extension, else an acyclic orientation.
    pub fn scoring_dag(&self, seed: u64) -> Result<MixedGraph> {
        if self.is_dag() {
            return Ok(self.clone());
        }
        consistent_extension(self, seed).or_else(|_| acyclic_orientation(self, seed))
    }

    /// Whether every directed edge of `self` is matched with the same
    /// direction in `other` and every undirected edge has some edge in `other`.
    pub fn is_extended_by(&self, other: &MixedGraph) -> bool {
        self.edge_list().into_iter().all(|(a, b, _)| {
            let (Some(ia), Some(ib)) = (other.index_of(self.name(a).as_str()), other.index_of(self.name(b).as_str()))
            else {
                return false;
            };
            match self.mark(a, b) {
                Some(Mark::Out) => other.mark(ia, ib) == Some(Mark::Out),
                _ => other.adjacent(ia, ib),
            }
        })
    }
}

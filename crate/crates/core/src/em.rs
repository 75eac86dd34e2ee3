//! Expectation-Maximization for a DAG with exactly one hidden categorical
//! node.
//!
//! Only the families that touch the hidden node (its own family and those of
//! its children) depend on the hidden values; every other family keeps its
//! complete-data MLE and contributes a constant to the log-likelihood.
//! Records are grouped by their values on the observed variables of the
//! touching families, so one E-step costs
//! `O(#patterns · #touching families · r_hidden)`.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{config_index, counts_idx, Dataset, Variable};
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, NodeId};
use crate::model::{flat_dirichlet, Cpt};
use crate::score::family_loglik;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Stop once an iteration improves the log-likelihood by less than this.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Number of random (flat-Dirichlet) initializations.
    pub restarts: usize,
    pub seed: u64,
    /// Adds one extra start in which the hidden node copies its observed
    /// proxy child through a 90% diagonal channel.
    pub warm_start: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { epsilon: 1e-3, max_iter: 200, restarts: 3, seed: 0, warm_start: true }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan()
            || self.epsilon <= 0.0
            || self.max_iter == 0
            || (self.restarts == 0 && !self.warm_start)
        {
            return Err(Error::InvalidArgument("EM needs epsilon > 0, max_iter >= 1 and at least one start".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    /// CPTs for every graph node, in node order; parents in node order.
    pub theta: Vec<Cpt>,
    /// `log P(D | θ^t)` per iteration of the best start.
    pub ll_trace: Vec<f64>,
    pub converged: bool,
    pub best_restart: usize,
    pub loglik: f64,
    /// Final log-likelihood of every start.
    pub start_logliks: Vec<f64>,
}

/// A touching family: node, its parents (node indices, ascending) and sizes.
#[derive(Debug, Clone)]
struct Family {
    node: usize,
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    card: usize,
}

impl Family {
    fn q(&self) -> usize {
        self.parent_cards.iter().product()
    }
}

struct Pattern {
    count: f64,
    /// `cells[f * r_h + h]` = flat index into family `f`'s table when the
    /// hidden node takes state `h`.
    cells: Vec<usize>,
}

/// Compiled EM problem.
struct HiddenModel {
    hidden: usize,
    r_h: usize,
    cards: Vec<usize>,
    families: Vec<Family>,
    patterns: Vec<Pattern>,
    constant_ll: f64,
    /// MLE tables of the non-touching families, by node.
    constant_tables: HashMap<usize, Vec<Vec<f64>>>,
    /// observed child with the hidden node as only parent and equal cardinality
    proxy: Option<usize>,
    cols: Vec<Option<usize>>,
}

type Tables = Vec<Vec<f64>>;

impl HiddenModel {
    fn compile(g: &MixedGraph, hidden: &Variable, data: &Dataset) -> Result<Self> {
        if !g.is_dag() {
            return Err(Error::NotADag);
        }
        let h = g.require(hidden.name.as_str())?;
        if data.column_index(hidden.name.as_str()).is_some() {
            return Err(Error::InvalidReconstruction(format!("hidden node `{}` is a data column", hidden.name)));
        }
        let mut cols = Vec::with_capacity(g.node_count());
        let mut cards = Vec::with_capacity(g.node_count());
        for (v, name) in g.nodes().iter().enumerate() {
            if v == h {
                cols.push(None);
                cards.push(hidden.cardinality());
            } else {
                let c = data.require_column(name.as_str())?;
                cols.push(Some(c));
                cards.push(data.cardinality(c));
            }
        }
        let children = g.children_idx(h);
        if children.is_empty() {
            return Err(Error::InvalidReconstruction(format!("hidden node `{}` has no observed child", hidden.name)));
        }
        let r_h = hidden.cardinality();

        let mut families = Vec::new();
        let mut constant_ll = 0.0;
        let mut constant_tables = HashMap::new();
        for v in 0..g.node_count() {
            let parents = g.parents_idx(v);
            let parent_cards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
            if v == h || parents.contains(&h) {
                families.push(Family { node: v, parents, parent_cards, card: cards[v] });
            } else {
                let pc: Vec<usize> = parents.iter().map(|&p| cols[p].unwrap()).collect();
                let s = counts_idx(data, cols[v].unwrap(), &pc);
                constant_ll += family_loglik(&s);
                constant_tables
                    .insert(v, mle_rows(&s.counts.iter().map(|&c| c as f64).collect::<Vec<_>>(), s.child_card));
            }
        }

        let mut blanket: Vec<usize> =
            families.iter().flat_map(|f| f.parents.iter().copied().chain([f.node])).filter(|&v| v != h).collect();
        blanket.sort_unstable();
        blanket.dedup();

        let mut groups: HashMap<Vec<u16>, u64> = HashMap::new();
        for r in 0..data.n_rows() {
            let key: Vec<u16> = blanket.iter().map(|&v| data.column(cols[v].unwrap())[r]).collect();
            *groups.entry(key).or_insert(0) += 1;
        }
        let mut keys: Vec<(Vec<u16>, u64)> = groups.into_iter().collect();
        keys.sort_unstable();

        let mut state = vec![0usize; g.node_count()];
        let patterns = keys
            .into_iter()
            .map(|(key, count)| {
                for (&v, &x) in blanket.iter().zip(&key) {
                    state[v] = usize::from(x);
                }
                let mut cells = Vec::with_capacity(families.len() * r_h);
                for f in &families {
                    for hs in 0..r_h {
                        state[h] = hs;
                        let j = config_index(f.parents.iter().map(|&p| state[p]), &f.parent_cards);
                        cells.push(j * f.card + state[f.node]);
                    }
                }
                Pattern { count: count as f64, cells }
            })
            .collect();

        let proxy = children.iter().copied().find(|&c| g.parents_idx(c) == [h] && cards[c] == r_h);

        Ok(HiddenModel { hidden: h, r_h, cards, families, patterns, constant_ll, constant_tables, proxy, cols })
    }

    /// Log-likelihood at `theta` and the expected counts `Ñ_ijk`.
    fn e_step(&self, theta: &Tables) -> (f64, Tables) {
        let r_h = self.r_h;
        let mut acc: Tables = theta.iter().map(|t| vec![0.0; t.len()]).collect();
        let mut ll = self.constant_ll;
        let mut w = vec![0.0; r_h];
        for p in &self.patterns {
            for (hs, wh) in w.iter_mut().enumerate() {
                *wh = self.families.iter().enumerate().map(|(f, _)| theta[f][p.cells[f * r_h + hs]]).product();
            }
            let s: f64 = w.iter().sum();
            if s > 0.0 {
                ll += p.count * s.ln();
                for (hs, &wh) in w.iter().enumerate() {
                    let post = p.count * wh / s;
                    for f in 0..self.families.len() {
                        acc[f][p.cells[f * r_h + hs]] += post;
                    }
                }
            } else {
                ll += p.count * f64::MIN_POSITIVE.ln();
                let post = p.count / r_h as f64;
                for hs in 0..r_h {
                    for f in 0..self.families.len() {
                        acc[f][p.cells[f * r_h + hs]] += post;
                    }
                }
            }
        }
        (ll, acc)
    }

    fn m_step(&self, acc: &Tables) -> Tables {
        self.families.iter().zip(acc).map(|(f, a)| mle_rows(a, f.card).concat()).collect()
    }

    fn random_init(&self, rng: &mut ChaCha8Rng) -> Tables {
        self.families.iter().map(|f| (0..f.q()).flat_map(|_| flat_dirichlet(rng, f.card)).collect()).collect()
    }

    /// Hidden values copied from the proxy child: touching families get
    /// their MLE (plus one pseudo-count) under that completion, the proxy's
    /// own family a 0.9 diagonal channel.
    fn warm_init(&self, data: &Dataset) -> Option<Tables> {
        let proxy = self.proxy?;
        let proxy_col = data.column(self.cols[proxy].unwrap());
        let value = |v: usize, r: usize| -> usize {
            if v == self.hidden {
                usize::from(proxy_col[r])
            } else {
                usize::from(data.column(self.cols[v].unwrap())[r])
            }
        };
        let tables = self
            .families
            .iter()
            .map(|f| {
                if f.node == proxy {
                    let off = 0.1 / (f.card - 1) as f64;
                    return (0..f.card)
                        .flat_map(|l| (0..f.card).map(move |k| if k == l { 0.9 } else { off }))
                        .collect();
                }
                let mut counts = vec![1.0; f.q() * f.card];
                for r in 0..data.n_rows() {
                    let j = config_index(f.parents.iter().map(|&p| value(p, r)), &f.parent_cards);
                    counts[j * f.card + value(f.node, r)] += 1.0;
                }
                mle_rows(&counts, f.card).concat()
            })
            .collect();
        Some(tables)
    }

    fn run(&self, mut theta: Tables, cfg: &EmConfig) -> (Tables, Vec<f64>, bool) {
        let mut trace = Vec::new();
        let mut converged = false;
        for _ in 0..cfg.max_iter {
            let (ll, acc) = self.e_step(&theta);
            if let Some(&prev) = trace.last() {
                if ll - prev < cfg.epsilon {
                    trace.push(ll);
                    converged = true;
                    break;
                }
            }
            trace.push(ll);
            theta = self.m_step(&acc);
        }
        if !converged {
            trace.push(self.e_step(&theta).0);
        }
        (theta, trace, converged)
    }

    fn to_cpts(&self, g: &MixedGraph, theta: &Tables) -> Result<Vec<Cpt>> {
        let mut out = Vec::with_capacity(g.node_count());
        for v in 0..g.node_count() {
            let parents = g.parents_idx(v);
            let parent_cards: Vec<usize> = parents.iter().map(|&p| self.cards[p]).collect();
            let table = match self.families.iter().position(|f| f.node == v) {
                Some(f) => theta[f].chunks(self.cards[v]).map(<[f64]>::to_vec).collect(),
                None => self.constant_tables[&v].clone(),
            };
            out.push(Cpt::new(
                g.name(v).clone(),
                parents.iter().map(|&p| g.name(p).clone()).collect(),
                parent_cards,
                table,
            )?);
        }
        Ok(out)
    }

    /// Touching-family tables read from caller-supplied CPTs, whatever
    /// their parent order.
    fn tables_from_cpts(&self, g: &MixedGraph, theta: &[Cpt]) -> Result<Tables> {
        self.families
            .iter()
            .map(|f| {
                let name = g.name(f.node);
                let cpt =
                    theta.iter().find(|c| &c.child == name).ok_or_else(|| Error::NodeNotFound(name.to_string()))?;
                let perm: Vec<usize> = cpt
                    .parents
                    .iter()
                    .map(|p| {
                        let i = g.require(p.as_str())?;
                        f.parents
                            .iter()
                            .position(|&x| x == i)
                            .ok_or_else(|| Error::SchemaMismatch(format!("CPT parents of `{name}`")))
                    })
                    .collect::<Result<_>>()?;
                if perm.len() != f.parents.len() || cpt.child_card() != f.card {
                    return Err(Error::SchemaMismatch(format!("CPT of `{name}` does not fit the graph")));
                }
                let mut flat = Vec::with_capacity(f.q() * f.card);
                let mut states = vec![0usize; f.parents.len()];
                for j in 0..f.q() {
                    let mut rem = j;
                    for (s, &c) in states.iter_mut().zip(&f.parent_cards).rev() {
                        *s = rem % c;
                        rem /= c;
                    }
                    let theirs: Vec<usize> = perm.iter().map(|&i| states[i]).collect();
                    flat.extend_from_slice(&cpt.table[cpt.row_index(&theirs)]);
                }
                Ok(flat)
            })
            .collect()
    }
}

/// Row-normalizes a flat `q × r` table; empty rows become uniform.
fn mle_rows(counts: &[f64], r: usize) -> Vec<Vec<f64>> {
    counts
        .chunks(r)
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|c| c / s).collect()
            } else {
                vec![1.0 / r as f64; r]
            }
        })
        .collect()
}

/// Fits the parameters of `g` to `data` with `hidden` marginalized out.
/// Returns the best start by final log-likelihood (lowest index on ties).
pub fn em_fit(g: &MixedGraph, hidden: &Variable, data: &Dataset, cfg: &EmConfig) -> Result<EmResult> {
    cfg.validate()?;
    let model = HiddenModel::compile(g, hidden, data)?;
    let mut starts: Vec<Tables> = Vec::new();
    if cfg.warm_start {
        if let Some(t) = model.warm_init(data) {
            starts.push(t);
        }
    }
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_index(cfg.seed, r as u64));
        starts.push(model.random_init(&mut rng));
    }
    if starts.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        starts.push(model.random_init(&mut rng));
    }

    let mut best: Option<(usize, Tables, Vec<f64>, bool)> = None;
    let mut start_logliks = Vec::with_capacity(starts.len());
    for (i, init) in starts.into_iter().enumerate() {
        let (theta, trace, converged) = model.run(init, cfg);
        let ll = *trace.last().unwrap();
        start_logliks.push(ll);
        if best.as_ref().is_none_or(|b| ll > *b.2.last().unwrap()) {
            best = Some((i, theta, trace, converged));
        }
    }
    let (best_restart, theta, ll_trace, converged) = best.unwrap();
    Ok(EmResult {
        theta: model.to_cpts(g, &theta)?,
        loglik: *ll_trace.last().unwrap(),
        ll_trace,
        converged,
        best_restart,
        start_logliks,
    })
}

/// Log-likelihood of `data` under `theta` with the hidden node summed out.
pub fn hidden_loglik(g: &MixedGraph, hidden: &Variable, data: &Dataset, theta: &[Cpt]) -> Result<f64> {
    let model = HiddenModel::compile(g, hidden, data)?;
    let tables = model.tables_from_cpts(g, theta)?;
    let (ll, _) = model.e_step(&tables);
    // non-touching families are scored with the caller's CPTs, not the MLE
    let mut ll = ll - model.constant_ll;
    for (v, name) in g.nodes().iter().enumerate() {
        if model.families.iter().any(|f| f.node == v) {
            continue;
        }
        let cpt = theta.iter().find(|c| &c.child == name).ok_or_else(|| Error::NodeNotFound(name.to_string()))?;
        let pcols: Vec<usize> = cpt.parents.iter().map(|p| data.require_column(p.as_str())).collect::<Result<_>>()?;
        let col = data.column(model.cols[v].unwrap());
        for (r, &x) in col.iter().enumerate() {
            let pa: Vec<usize> = pcols.iter().map(|&c| usize::from(data.column(c)[r])).collect();
            ll += cpt.prob(&pa, usize::from(x)).ln();
        }
    }
    Ok(ll)
}

/// Expected counts `Ñ_ijk` under `theta` for every family touching the
/// hidden node, as `(node, q × r table)` with parents in node order.
pub fn expected_counts(
    g: &MixedGraph,
    hidden: &Variable,
    data: &Dataset,
    theta: &[Cpt],
) -> Result<Vec<(NodeId, Vec<Vec<f64>>)>> {
    let model = HiddenModel::compile(g, hidden, data)?;
    let tables = model.tables_from_cpts(g, theta)?;
    let (_, acc) = model.e_step(&tables);
    Ok(model
        .families
        .iter()
        .zip(acc)
        .map(|(f, a)| (g.name(f.node).clone(), a.chunks(f.card).map(<[f64]>::to_vec).collect()))
        .collect())
}

/// `P(hidden | record)` under `theta`; `record` maps observed node names to
/// state indices. An all-zero unnormalized vector yields the uniform
/// distribution.
pub fn posterior_hidden(
    theta: &[Cpt],
    g: &MixedGraph,
    hidden: &str,
    record: &HashMap<String, usize>,
) -> Result<Vec<f64>> {
    let h = g.require(hidden)?;
    let cpt_of = |v: usize| {
        let name = g.name(v);
        theta.iter().find(|c| &c.child == name).ok_or_else(|| Error::NodeNotFound(name.to_string()))
    };
    let r_h = cpt_of(h)?.child_card();
    let value = |name: &NodeId, hs: usize| -> Result<usize> {
        if name.as_str() == hidden {
            Ok(hs)
        } else {
            record.get(name.as_str()).copied().ok_or_else(|| Error::NodeNotFound(name.to_string()))
        }
    };
    let mut touching = vec![h];
    touching.extend(g.children_idx(h));
    let mut w = vec![0.0; r_h];
    for (hs, wh) in w.iter_mut().enumerate() {
        let mut p = 1.0;
        for &v in &touching {
            let cpt = cpt_of(v)?;
            let pa = cpt.parents.iter().map(|n| value(n, hs)).collect::<Result<Vec<_>>>()?;
            p *= cpt.prob(&pa, value(&cpt.child, hs)?);
        }
        *wh = p;
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        Ok(w.into_iter().map(|x| x / s).collect())
    } else {
        Ok(vec![1.0 / r_h as f64; r_h])
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;
    use crate::model::{corrupt, forward_sample, BayesNet, NoiseChannel};
    use crate::score::loglik_complete;

    fn var(name: &str, r: usize) -> Variable {
        Variable::with_arity(name, r).unwrap()
    }

    fn id(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    /// A -> H -> B with H also observed as H^o through `rate` symmetric noise.
    fn chain_net(rate_ab: f64) -> BayesNet {
        let g = parse_graph("A -> H\nH -> B").unwrap();
        BayesNet::new(
            g,
            vec![var("A", 2), var("H", 2), var("B", 2)],
            vec![
                Cpt::new(id("A"), vec![], vec![], vec![vec![0.4, 0.6]]).unwrap(),
                Cpt::new(id("H"), vec![id("A")], vec![2], vec![vec![1.0 - rate_ab, rate_ab], vec![0.25, 0.75]])
                    .unwrap(),
                Cpt::new(id("B"), vec![id("H")], vec![2], vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap(),
            ],
        )
        .unwrap()
    }

    /// Renames column `H` to `Ho` (the observed proxy).
    fn observe_h(data: &Dataset) -> Dataset {
        let vars = data
            .variables()
            .iter()
            .map(|v| if v.name.as_str() == "H" { var("Ho", v.cardinality()) } else { v.clone() })
            .collect();
        Dataset::from_columns(vars, (0..data.variables().len()).map(|i| data.column(i).to_vec()).collect()).unwrap()
    }

    fn hidden_graph() -> MixedGraph {
        parse_graph("A -> H\nH -> B\nH -> Ho").unwrap()
    }

    #[test]
    fn noiseless_proxy_recovers_complete_loglik() {
        // A -> H -> Ho is saturated on (A, Ho) either way, so the optimum
        // coincides with the complete-data fit of A -> Ho
        let bn = chain_net(0.1);
        let data = observe_h(&forward_sample(&bn, 5000, 4).unwrap());
        let data = Dataset::from_columns(
            vec![var("A", 2), var("Ho", 2)],
            vec![data.column(0).to_vec(), data.column(1).to_vec()],
        )
        .unwrap();
        let g = parse_graph("A -> H\nH -> Ho").unwrap();
        let cfg = EmConfig { seed: 3, ..EmConfig::default() };
        let res = em_fit(&g, &var("H", 2), &data, &cfg).unwrap();
        let complete = loglik_complete(&parse_graph("A -> Ho").unwrap(), &data).unwrap();
        assert!((res.loglik - complete).abs() <= 2.0 * cfg.epsilon, "{} vs {complete}", res.loglik);
    }

    #[test]
    fn hidden_fit_contains_complete_fit() {
        let bn = chain_net(0.1);
        let data = observe_h(&forward_sample(&bn, 5000, 4).unwrap());
        let complete = loglik_complete(&parse_graph("A -> Ho\nHo -> B").unwrap(), &data).unwrap();
        let warm = em_fit(&hidden_graph(), &var("H", 2), &data, &EmConfig { seed: 3, ..EmConfig::default() }).unwrap();
        assert!(warm.loglik >= complete - 2e-3, "{} vs {complete}", warm.loglik);
        let cfg = EmConfig { seed: 11, warm_start: false, restarts: 5, max_iter: 2000, epsilon: 1e-7 };
        let cold = em_fit(&hidden_graph(), &var("H", 2), &data, &cfg).unwrap();
        assert!(cold.loglik >= complete - 0.05, "{} vs {complete}", cold.loglik);
    }

    /// Grid maximum of the A -> H -> B likelihood with binary hidden H.
    fn grid_max(data: &Dataset, step: f64) -> f64 {
        let mut n = [[0.0f64; 2]; 2];
        for r in 0..data.n_rows() {
            n[usize::from(data.column(0)[r])][usize::from(data.column(1)[r])] += 1.0;
        }
        let k = (1.0 / step).round() as usize;
        let grid: Vec<f64> = (0..=k).map(|i| i as f64 * step).collect();
        let mut best = f64::NEG_INFINITY;
        for &pa in &grid {
            for &h0 in &grid {
                for &h1 in &grid {
                    for &b0 in &grid {
                        for &b1 in &grid {
                            let ph = |a: usize| if a == 0 { h0 } else { h1 };
                            let pb = |h: usize| if h == 0 { b0 } else { b1 };
                            let mut ll = 0.0;
                            for a in 0..2 {
                                for b in 0..2 {
                                    if n[a][b] == 0.0 {
                                        continue;
                                    }
                                    let p_a = if a == 0 { 1.0 - pa } else { pa };
                                    let p_ab: f64 = (0..2)
                                        .map(|h| {
                                            let p_h = if h == 0 { 1.0 - ph(a) } else { ph(a) };
                                            let p_b = if b == 0 { 1.0 - pb(h) } else { pb(h) };
                                            p_a * p_h * p_b
                                        })
                                        .sum();
                                    ll += n[a][b] * p_ab.ln();
                                }
                            }
                            best = best.max(ll);
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn small_chain_matches_grid_search() {
        let g = parse_graph("A -> H\nH -> B").unwrap();
        let cases: [&[(u16, u16)]; 4] = [
            &[(0, 0)],
            &[(0, 0), (1, 1), (0, 1)],
            &[(0, 0), (0, 0), (1, 1), (1, 0), (0, 1)],
            &[(0, 0), (0, 0), (0, 0), (1, 1), (1, 1), (1, 0), (0, 1), (1, 1)],
        ];
        for rows in cases {
            let data = Dataset::from_columns(
                vec![var("A", 2), var("B", 2)],
                vec![rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()],
            )
            .unwrap();
            let cfg = EmConfig { epsilon: 1e-9, max_iter: 5000, restarts: 5, seed: 1, warm_start: false };
            let res = em_fit(&g, &var("H", 2), &data, &cfg).unwrap();
            // the saturated fit of (A, B) bounds every parameterization
            let saturated = loglik_complete(&parse_graph("A -> B").unwrap(), &data).unwrap();
            let grid = grid_max(&data, 0.05);
            assert!(res.loglik <= saturated + 1e-9, "{} > {saturated}", res.loglik);
            assert!(res.loglik >= grid - 0.05, "{} < grid {grid}", res.loglik);
        }
    }

    #[test]
    fn expected_counts_match_joint_enumeration() {
        // A -> H, H -> B, C -> B, H -> Ho with a ternary hidden node
        let g = parse_graph("A -> H\nH -> B\nC -> B\nH -> Ho").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = |q: usize, r: usize| (0..q).map(|_| flat_dirichlet(&mut rng, r)).collect::<Vec<_>>();
        let theta = vec![
            Cpt::new(id("A"), vec![], vec![], rows(1, 2)).unwrap(),
            Cpt::new(id("H"), vec![id("A")], vec![2], rows(2, 3)).unwrap(),
            Cpt::new(id("B"), vec![id("H"), id("C")], vec![3, 2], rows(6, 2)).unwrap(),
            Cpt::new(id("C"), vec![], vec![], rows(1, 2)).unwrap(),
            Cpt::new(id("Ho"), vec![id("H")], vec![3], rows(3, 3)).unwrap(),
        ];
        let sample_net = BayesNet::new(
            parse_graph("A -> Ho\nC -> B").unwrap(),
            vec![var("A", 2), var("B", 2), var("C", 2), var("Ho", 3)],
            vec![
                Cpt::new(id("A"), vec![], vec![], vec![vec![0.5, 0.5]]).unwrap(),
                Cpt::new(id("B"), vec![id("C")], vec![2], vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap(),
                Cpt::new(id("C"), vec![], vec![], vec![vec![0.5, 0.5]]).unwrap(),
                Cpt::new(id("Ho"), vec![id("A")], vec![2], vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.1, 0.3]]).unwrap(),
            ],
        )
        .unwrap();
        let data = forward_sample(&sample_net, 300, 9).unwrap();
        let col = |n: &str| data.column(data.column_index(n).unwrap()).to_vec();
        let (a, b, c, o) = (col("A"), col("B"), col("C"), col("Ho"));

        let mut want_h = vec![vec![0.0; 3]; 2];
        let mut want_b = vec![vec![0.0; 2]; 6];
        let mut want_o = vec![vec![0.0; 3]; 3];
        for r in 0..data.n_rows() {
            let (a, b, c, o) = (usize::from(a[r]), usize::from(b[r]), usize::from(c[r]), usize::from(o[r]));
            let joint: Vec<f64> = (0..3)
                .map(|h| {
                    theta[0].prob(&[], a)
                        * theta[1].prob(&[a], h)
                        * theta[2].prob(&[h, c], b)
                        * theta[3].prob(&[], c)
                        * theta[4].prob(&[h], o)
                })
                .collect();
            let z: f64 = joint.iter().sum();
            for h in 0..3 {
                let post = joint[h] / z;
                want_h[a][h] += post;
                want_b[h * 2 + c][b] += post;
                want_o[h][o] += post;
            }
        }
        let got = expected_counts(&g, &var("H", 3), &data, &theta).unwrap();
        let lookup = |n: &str| &got.iter().find(|(k, _)| k.as_str() == n).unwrap().1;
        for (want, name) in [(&want_h, "H"), (&want_b, "B"), (&want_o, "Ho")] {
            for (x, y) in want.iter().flatten().zip(lookup(name).iter().flatten()) {
                assert!((x - y).abs() < 1e-9, "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn fit_beats_uniform_hidden_parameters() {
        let bn = chain_net(0.3);
        let clean = forward_sample(&bn, 2000, 13).unwrap();
        let data =
            observe_h(&corrupt(&clean, &NoiseChannel::symmetric(bn.variables(), &[("H", 0.1)]).unwrap(), 2).unwrap());
        let g = hidden_graph();
        let res = em_fit(&g, &var("H", 2), &data, &EmConfig::default()).unwrap();
        let mut uniform = res.theta.clone();
        for c in uniform.iter_mut().filter(|c| c.child.as_str() == "H" || c.parents.iter().any(|p| p.as_str() == "H")) {
            for row in &mut c.table {
                row.iter_mut().for_each(|p| *p = 0.5);
            }
        }
        assert!(res.loglik >= hidden_loglik(&g, &var("H", 2), &data, &uniform).unwrap());
    }

    #[test]
    fn trace_is_monotone() {
        let bn = chain_net(0.3);
        let clean = forward_sample(&bn, 3000, 8).unwrap();
        let noisy = corrupt(&clean, &NoiseChannel::symmetric(bn.variables(), &[("H", 0.15)]).unwrap(), 2).unwrap();
        let data = observe_h(&noisy);
        for seed in 0..5 {
            let cfg = EmConfig { seed, ..EmConfig::default() };
            let res = em_fit(&hidden_graph(), &var("H", 2), &data, &cfg).unwrap();
            for w in res.ll_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-6, "{w:?}");
            }
            for row in res.theta.iter().flat_map(|c| &c.table) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_step_from_truth_barely_moves() {
        let bn = chain_net(0.3);
        let clean = forward_sample(&bn, 100_000, 81).unwrap();
        let ch = NoiseChannel::symmetric(bn.variables(), &[("H", 0.1)]).unwrap();
        let data = observe_h(&corrupt(&clean, &ch, 1).unwrap());
        let g = hidden_graph();
        let h = var("H", 2);
        let mut truth: Vec<Cpt> = bn.cpts().to_vec();
        truth.push(Cpt::new(id("Ho"), vec![id("H")], vec![2], vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap());
        let model = HiddenModel::compile(&g, &h, &data).unwrap();
        let t0 = model.tables_from_cpts(&g, &truth).unwrap();
        let (ll0, acc) = model.e_step(&t0);
        let t1 = model.m_step(&acc);
        let (ll1, _) = model.e_step(&t1);
        assert!(ll1 >= ll0 - 1e-9);
        for (a, b) in t0.iter().zip(&t1) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 0.05, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn posterior_examples() {
        let g = parse_graph("H -> Ho").unwrap();
        let theta = vec![
            Cpt::new(id("H"), vec![], vec![], vec![vec![0.3, 0.3, 0.4]]).unwrap(),
            Cpt::new(
                id("Ho"),
                vec![id("H")],
                vec![3],
                vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            )
            .unwrap(),
        ];
        let rec: HashMap<String, usize> = [("Ho".to_string(), 1)].into();
        assert_eq!(posterior_hidden(&theta, &g, "H", &rec).unwrap(), vec![0.0, 1.0, 0.0]);

        let flat = vec![
            Cpt::new(id("H"), vec![], vec![], vec![vec![0.5, 0.5]]).unwrap(),
            Cpt::new(id("Ho"), vec![id("H")], vec![2], vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap(),
        ];
        let rec: HashMap<String, usize> = [("Ho".to_string(), 0)].into();
        assert_eq!(posterior_hidden(&flat, &g, "H", &rec).unwrap(), vec![0.5, 0.5]);

        let zero = vec![
            Cpt::new(id("H"), vec![], vec![], vec![vec![1.0, 0.0]]).unwrap(),
            Cpt::new(id("Ho"), vec![id("H")], vec![2], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        ];
        let rec: HashMap<String, usize> = [("Ho".to_string(), 1)].into();
        assert_eq!(posterior_hidden(&zero, &g, "H", &rec).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn posterior_matches_joint_enumeration() {
        // A -> H -> B, H -> Ho, C -> B: brute force P(H | A, B, C, Ho) from the full joint
        let g = parse_graph("A -> H\nH -> B\nC -> B\nH -> Ho").unwrap();
        let theta = vec![
            Cpt::new(id("A"), vec![], vec![], vec![vec![0.3, 0.7]]).unwrap(),
            Cpt::new(id("H"), vec![id("A")], vec![2], vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.3, 0.1]]).unwrap(),
            Cpt::new(
                id("B"),
                vec![id("H"), id("C")],
                vec![3, 2],
                vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.15, 0.85], vec![0.7, 0.3]],
            )
            .unwrap(),
            Cpt::new(id("C"), vec![], vec![], vec![vec![0.45, 0.55]]).unwrap(),
            Cpt::new(
                id("Ho"),
                vec![id("H")],
                vec![3],
                vec![vec![0.8, 0.1, 0.1], vec![0.05, 0.9, 0.05], vec![0.2, 0.2, 0.6]],
            )
            .unwrap(),
        ];
        let joint = |a: usize, h: usize, b: usize, c: usize, o: usize| {
            theta[0].prob(&[], a)
                * theta[1].prob(&[a], h)
                * theta[2].prob(&[h, c], b)
                * theta[3].prob(&[], c)
                * theta[4].prob(&[h], o)
        };
        for (a, b, c, o) in [(0, 0, 0, 0), (1, 1, 0, 2), (0, 1, 1, 1), (1, 0, 1, 0)] {
            let rec: HashMap<String, usize> =
                [("A".to_string(), a), ("B".to_string(), b), ("C".to_string(), c), ("Ho".to_string(), o)].into();
            let post = posterior_hidden(&theta, &g, "H", &rec).unwrap();
            let z: f64 = (0..3).map(|h| joint(a, h, b, c, o)).sum();
            for h in 0..3 {
                assert!((post[h] - joint(a, h, b, c, o) / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_hidden_without_child() {
        let g = parse_graph("A -> H").unwrap();
        let data = Dataset::from_columns(vec![var("A", 2)], vec![vec![0, 1]]).unwrap();
        assert!(matches!(em_fit(&g, &var("H", 2), &data, &EmConfig::default()), Err(Error::InvalidReconstruction(_))));
        let g2 = parse_graph("A -- H").unwrap();
        assert_eq!(em_fit(&g2, &var("H", 2), &data, &EmConfig::default()), Err(Error::NotADag));
    }

    #[test]
    fn hidden_loglik_agrees_with_fit() {
        let bn = chain_net(0.2);
        let data = observe_h(&forward_sample(&bn, 800, 2).unwrap());
        let res = em_fit(&hidden_graph(), &var("H", 2), &data, &EmConfig::default()).unwrap();
        let ll = hidden_loglik(&hidden_graph(), &var("H", 2), &data, &res.theta).unwrap();
        assert!((ll - res.loglik).abs() < 1e-6);
    }
}

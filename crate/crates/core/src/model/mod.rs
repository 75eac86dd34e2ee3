//! Discrete Bayesian networks: CPTs, ancestral sampling, random network
//! generation and the measurement-error channel.

mod file;
mod noise;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::data::Dataset;
pub use crate::data::Variable;
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, NodeId};
pub use file::{parse_network, read_network, write_network, NetworkFile};
pub use noise::{corrupt, draw_noise_channel, NoiseChannel, VariableChannel};

const ROW_TOL: f64 = 1e-9;

/// Conditional probability table. Rows are parent configurations in mixed
/// radix (last parent fastest), columns are child states.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: NodeId,
    pub parents: Vec<NodeId>,
    pub parent_cards: Vec<usize>,
    pub table: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(child: NodeId, parents: Vec<NodeId>, parent_cards: Vec<usize>, table: Vec<Vec<f64>>) -> Result<Self> {
        let cpt = Cpt { child, parents, parent_cards, table };
        cpt.validate()?;
        Ok(cpt)
    }

    fn validate(&self) -> Result<()> {
        let q: usize = self.parent_cards.iter().product();
        let bad = |msg: String| Err(Error::SchemaMismatch(format!("CPT of `{}`: {msg}", self.child)));
        if self.parents.len() != self.parent_cards.len() {
            return bad("parent list and cardinalities differ".into());
        }
        if self.table.len() != q {
            return bad(format!("expected {q} rows, found {}", self.table.len()));
        }
        let r = self.child_card();
        for row in &self.table {
            if row.len() != r || r < 2 {
                return bad("inconsistent row length".into());
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad("entry outside [0, 1]".into());
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                return bad("row does not sum to 1".into());
            }
        }
        Ok(())
    }

    pub fn child_card(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    pub fn q(&self) -> usize {
        self.table.len()
    }

    pub fn row_index(&self, parent_states: &[usize]) -> usize {
        crate::data::config_index(parent_states.iter().copied(), &self.parent_cards)
    }

    pub fn prob(&self, parent_states: &[usize], state: usize) -> f64 {
        self.table[self.row_index(parent_states)][state]
    }
}

/// A DAG with one CPT per node. Variables and CPTs follow graph node order.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    graph: MixedGraph,
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
}

impl BayesNet {
    pub fn new(graph: MixedGraph, variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self> {
        if !graph.is_dag() {
            return Err(Error::NotADag);
        }
        let mut vars_sorted = Vec::with_capacity(graph.node_count());
        let mut cpts_sorted = Vec::with_capacity(graph.node_count());
        if variables.len() != graph.node_count() || cpts.len() != graph.node_count() {
            return Err(Error::SchemaMismatch("variables, CPTs and nodes must correspond one-to-one".into()));
        }
        for (i, node) in graph.nodes().iter().enumerate() {
            let var = variables
                .iter()
                .find(|v| &v.name == node)
                .ok_or_else(|| Error::SchemaMismatch(format!("no variable for node `{node}`")))?;
            let cpt = cpts
                .iter()
                .find(|c| &c.child == node)
                .ok_or_else(|| Error::SchemaMismatch(format!("no CPT for node `{node}`")))?;
            let graph_parents: BTreeSet<&NodeId> = graph.parents_idx(i).into_iter().map(|p| graph.name(p)).collect();
            let cpt_parents: BTreeSet<&NodeId> = cpt.parents.iter().collect();
            if graph_parents != cpt_parents || cpt_parents.len() != cpt.parents.len() {
                return Err(Error::SchemaMismatch(format!("CPT parents of `{node}` differ from the graph")));
            }
            if cpt.child_card() != var.cardinality() {
                return Err(Error::SchemaMismatch(format!("CPT of `{node}` has the wrong number of columns")));
            }
            for (p, &card) in cpt.parents.iter().zip(&cpt.parent_cards) {
                let pv = variables.iter().find(|v| &v.name == p).ok_or_else(|| Error::NodeNotFound(p.to_string()))?;
                if pv.cardinality() != card {
                    return Err(Error::SchemaMismatch(format!("parent cardinality of `{p}` in CPT of `{node}`")));
                }
            }
            cpt.validate()?;
            vars_sorted.push(var.clone());
            cpts_sorted.push(cpt.clone());
        }
        Ok(BayesNet { graph, variables: vars_sorted, cpts: cpts_sorted })
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, name: &str) -> Option<&Cpt> {
        self.cpts.iter().find(|c| c.child.as_str() == name)
    }

    /// Joint probability of a full assignment given in node order.
    pub fn joint(&self, states: &[usize]) -> f64 {
        self.cpts
            .iter()
            .enumerate()
            .map(|(i, cpt)| {
                let pa: Vec<usize> =
                    cpt.parents.iter().map(|p| states[self.graph.index_of(p.as_str()).unwrap()]).collect();
                cpt.prob(&pa, states[i])
            })
            .product()
    }
}

fn sample_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the cumulative sum: take the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Ancestral sampling of `n` records, columns in node order.
pub fn forward_sample(bn: &BayesNet, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let g = &bn.graph;
    let order = g.topological_order().ok_or(Error::NotADag)?;
    let parent_idx: Vec<Vec<usize>> =
        bn.cpts.iter().map(|c| c.parents.iter().map(|p| g.index_of(p.as_str()).unwrap()).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); g.node_count()];
    let mut state = vec![0usize; g.node_count()];
    for _ in 0..n {
        for &v in &order {
            let cpt = &bn.cpts[v];
            let j = crate::data::config_index(parent_idx[v].iter().map(|&p| state[p]), &cpt.parent_cards);
            state[v] = sample_index(&mut rng, &cpt.table[j]);
            columns[v].push(state[v] as u16);
        }
    }
    Dataset::from_columns(bn.variables.clone(), columns)
}

/// Draws from a symmetric Dirichlet(1, …, 1) of dimension `k`.
pub(crate) fn flat_dirichlet<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random network over `V0 … V{n-1}`. A seeded node order is drawn; each
/// earlier node becomes a parent with probability `edge_prob`, and parent
/// sets larger than `max_parents` are cut to a random subset of that size.
/// CPT rows are flat-Dirichlet draws.
pub fn random_bn(n_nodes: usize, arity: usize, max_parents: usize, edge_prob: f64, seed: u64) -> Result<BayesNet> {
    if n_nodes == 0 || arity < 2 || !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument("random_bn needs n_nodes >= 1, arity >= 2, edge_prob in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..n_nodes).map(|i| format!("V{i}")).collect();
    let mut graph = MixedGraph::with_nodes(names.iter().cloned())?;
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.shuffle(&mut rng);
    for (pos, &child) in order.iter().enumerate() {
        let mut parents: Vec<usize> = order[..pos].iter().copied().filter(|_| rng.gen_bool(edge_prob)).collect();
        if parents.len() > max_parents {
            parents.shuffle(&mut rng);
            parents.truncate(max_parents);
        }
        parents.sort_unstable();
        for p in parents {
            graph.add_directed(p, child)?;
        }
    }
    let variables: Vec<Variable> = names.iter().map(|n| Variable::with_arity(n, arity)).collect::<Result<_>>()?;
    let mut cpts = Vec::with_capacity(n_nodes);
    for v in 0..n_nodes {
        let parents = graph.parents_idx(v);
        let q = arity.pow(parents.len() as u32);
        let table = (0..q).map(|_| flat_dirichlet(&mut rng, arity)).collect();
        cpts.push(Cpt::new(
            graph.name(v).clone(),
            parents.iter().map(|&p| graph.name(p).clone()).collect(),
            vec![arity; parents.len()],
            table,
        )?);
    }
    BayesNet::new(graph, variables, cpts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::counts;

    fn chain_ab() -> BayesNet {
        let g = crate::graph::parse_graph("A -> B").unwrap();
        let a = NodeId::new("A").unwrap();
        let b = NodeId::new("B").unwrap();
        BayesNet::new(
            g,
            vec![Variable::with_arity("A", 2).unwrap(), Variable::with_arity("B", 3).unwrap()],
            vec![
                Cpt::new(a.clone(), vec![], vec![], vec![vec![0.3, 0.7]]).unwrap(),
                Cpt::new(b, vec![a], vec![2], vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_cpts_give_identical_records() {
        let g = crate::graph::parse_graph("A -> B").unwrap();
        let a = NodeId::new("A").unwrap();
        let bn = BayesNet::new(
            g,
            vec![Variable::with_arity("A", 2).unwrap(), Variable::with_arity("B", 2).unwrap()],
            vec![
                Cpt::new(a.clone(), vec![], vec![], vec![vec![0.0, 1.0]]).unwrap(),
                Cpt::new(NodeId::new("B").unwrap(), vec![a], vec![2], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            ],
        )
        .unwrap();
        let d = forward_sample(&bn, 50, 1).unwrap();
        for r in 0..50 {
            assert_eq!(d.row(r), vec![1, 0]);
        }
    }

    #[test]
    fn single_variable_frequency() {
        let bn = BayesNet::new(
            MixedGraph::with_nodes(["S"]).unwrap(),
            vec![Variable::with_arity("S", 2).unwrap()],
            vec![Cpt::new(NodeId::new("S").unwrap(), vec![], vec![], vec![vec![0.7, 0.3]]).unwrap()],
        )
        .unwrap();
        let d = forward_sample(&bn, 100_000, 9).unwrap();
        let f = counts(&d, "S", &[]).unwrap().counts[0] as f64 / 100_000.0;
        assert!((0.69..=0.71).contains(&f), "{f}");
    }

    #[test]
    fn chain_joint_matches_analytic() {
        let bn = chain_ab();
        let n = 100_000;
        let d = forward_sample(&bn, n, 3).unwrap();
        let s = counts(&d, "B", &["A"]).unwrap();
        for a in 0..2 {
            for b in 0..3 {
                let analytic = bn.joint(&[a, b]);
                let emp = s.n_ijk(a, b) as f64 / n as f64;
                assert!((analytic - emp).abs() <= 0.01, "{a},{b}: {analytic} vs {emp}");
            }
        }
        assert_eq!(forward_sample(&bn, 10, 4).unwrap(), forward_sample(&bn, 10, 4).unwrap());
        assert!(forward_sample(&bn, 0, 4).is_err());
    }

    #[test]
    fn bayes_net_validation() {
        let g = crate::graph::parse_graph("A -> B").unwrap();
        let a = NodeId::new("A").unwrap();
        let vars = vec![Variable::with_arity("A", 2).unwrap(), Variable::with_arity("B", 2).unwrap()];
        let missing_parent = vec![
            Cpt::new(a.clone(), vec![], vec![], vec![vec![0.5, 0.5]]).unwrap(),
            Cpt::new(NodeId::new("B").unwrap(), vec![], vec![], vec![vec![0.5, 0.5]]).unwrap(),
        ];
        assert!(BayesNet::new(g, vars, missing_parent).is_err());
        assert!(Cpt::new(a, vec![], vec![], vec![vec![0.5, 0.6]]).is_err());
    }

    #[test]
    fn random_bn_edge_cases() {
        let one = random_bn(1, 2, 3, 0.5, 1).unwrap();
        assert_eq!(one.graph().node_count(), 1);
        assert_eq!(one.cpts()[0].q(), 1);
        let empty = random_bn(8, 3, 3, 0.0, 1).unwrap();
        assert_eq!(empty.graph().edge_count(), 0);
        let bn = random_bn(12, 3, 2, 0.6, 5).unwrap();
        for v in 0..12 {
            assert!(bn.graph().parents_idx(v).len() <= 2);
        }
        for cpt in bn.cpts() {
            for row in &cpt.table {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert_eq!(random_bn(10, 2, 3, 0.3, 11).unwrap(), random_bn(10, 2, 3, 0.3, 11).unwrap());
    }

    /// P(Binomial(k, p) = x)
    fn binom_pmf(k: usize, x: usize, p: f64) -> f64 {
        let mut c = 1.0;
        for i in 0..x {
            c *= (k - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(x as i32) * (1.0 - p).powi((k - x) as i32)
    }

    #[test]
    fn random_bn_edge_count_matches_truncated_binomial() {
        let (n, m, p) = (20usize, 3usize, 0.15);
        // node at position k receives min(Binomial(k, p), m) parents, independently
        let mut mean = 0.0;
        let mut var = 0.0;
        for k in 0..n {
            let (mut e1, mut e2) = (0.0, 0.0);
            for x in 0..=k {
                let t = x.min(m) as f64;
                let w = binom_pmf(k, x, p);
                e1 += w * t;
                e2 += w * t * t;
            }
            mean += e1;
            var += e2 - e1 * e1;
        }
        let seeds = 50;
        let total: usize = (0..seeds).map(|s| random_bn(n, 2, m, p, s).unwrap().graph().edge_count()).sum();
        let emp = total as f64 / seeds as f64;
        let sd_of_mean = (var / seeds as f64).sqrt();
        assert!((emp - mean).abs() <= 3.0 * sd_of_mean, "mean {emp} vs {mean} ± {}", 3.0 * sd_of_mean);
    }
}

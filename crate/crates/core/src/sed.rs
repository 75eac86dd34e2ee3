//! Spurious edge detection: candidate sets, hidden-variable reconstructions
//! and the two-phase removal search.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Variable};
use crate::em::{EmConfig, EmResult};
use crate::error::{Error, Result};
use crate::graph::{find_3_cliques_idx, Edge, Mark, MixedGraph, NodeId};
use crate::score::{bic_hidden, bic_pdag, BicScore};
use crate::seeds;

/// For every variable, the edges joining two of its neighbours.
pub type CseMap = BTreeMap<NodeId, BTreeSet<Edge>>;

pub fn build_cse(g: &MixedGraph) -> CseMap {
    let mut cse = CseMap::new();
    for [a, b, c] in find_3_cliques_idx(g) {
        for (v, x, y) in [(a, b, c), (b, a, c), (c, a, b)] {
            let e = g.edge_at(x, y).expect("clique edge");
            cse.entry(g.name(v).clone()).or_default().insert(e);
        }
    }
    cse
}

/// Label of the hidden error-free stand-in for `v`.
pub fn hidden_label(v: &NodeId) -> String {
    format!("{v}*")
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub delta: f64,
    pub score_i: BicScore,
    pub score_r: BicScore,
    /// The reconstructed graph as scored (a DAG).
    pub g_r: MixedGraph,
    pub em: EmResult,
}

/// Builds the reconstructed graph: `e` removed, `v`'s adjacencies moved to
/// a hidden node and `v` kept as that node's only child. Orientations of the
/// input are preserved.
pub fn reconstructed_graph(g: &MixedGraph, v: &str, e: &BTreeSet<Edge>) -> Result<MixedGraph> {
    let vi = g.require(v)?;
    let vid = g.name(vi).clone();
    let mut g_r = g.clone();
    for edge in e {
        if edge.touches(&vid) {
            return Err(Error::InvalidCandidate(format!("edge `{edge}` touches `{v}`")));
        }
        let (a, b) = (g.require(edge.a.as_str())?, g.require(edge.b.as_str())?);
        if g_r.remove_pair(a, b).is_none() {
            return Err(Error::EdgeNotFound(edge.a.to_string(), edge.b.to_string()));
        }
    }
    let h = g_r.add_node(hidden_label(&vid))?;
    for u in g.adjacent_idx(vi).collect::<Vec<_>>() {
        match g_r.remove_pair(vi, u).expect("adjacent") {
            Mark::Out => g_r.add_directed(h, u)?,
            Mark::In => g_r.add_directed(u, h)?,
            Mark::Undirected => g_r.add_undirected(h, u)?,
        }
    }
    g_r.add_directed(h, vi)?;
    Ok(g_r)
}

/// Scores the reconstruction of `g` that treats `v` as a noisy copy of a
/// hidden variable and drops the edges `e`. `seed` fixes the DAG chosen for
/// partially directed graphs; EM runs with `cfg`.
pub fn reconstruction(
    g: &MixedGraph,
    v: &str,
    e: &BTreeSet<Edge>,
    data: &Dataset,
    cfg: &EmConfig,
    seed: u64,
) -> Result<ReconstructionResult> {
    reconstructed_graph(g, v, e)?;
    let score_i = bic_pdag(g, data, seed)?;
    reconstruction_with_base(g, v, e, data, cfg, seed, score_i)
}

fn reconstruction_with_base(
    g: &MixedGraph,
    v: &str,
    e: &BTreeSet<Edge>,
    data: &Dataset,
    cfg: &EmConfig,
    seed: u64,
    score_i: BicScore,
) -> Result<ReconstructionResult> {
    let g_r = reconstructed_graph(g, v, e)?.scoring_dag(seed)?;
    let observed = data.variable(v).ok_or_else(|| Error::NodeNotFound(v.to_string()))?;
    let hidden = Variable::from_labels(NodeId::new(hidden_label(&observed.name))?, observed.states.clone())?;
    let (score_r, em) = bic_hidden(&g_r, &hidden, data, cfg)?;
    Ok(ReconstructionResult { delta: score_r.value - score_i.value, score_i, score_r, g_r, em })
}

/// Which graph reconstructions are built from after the first removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasePolicy {
    /// The modified graph as it stood at the start of the current pass.
    #[default]
    Gmod,
    /// The input graph, throughout.
    Literal,
}

impl std::str::FromStr for BasePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmod" => Ok(BasePolicy::Gmod),
            "literal" => Ok(BasePolicy::Literal),
            _ => Err(Error::InvalidArgument(format!("unknown base policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SedConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub warm_start: bool,
    pub seed: u64,
    pub base: BasePolicy,
}

impl Default for SedConfig {
    fn default() -> Self {
        let em = EmConfig::default();
        SedConfig {
            epsilon: em.epsilon,
            max_iter: em.max_iter,
            restarts: em.restarts,
            warm_start: em.warm_start,
            seed: 0,
            base: BasePolicy::Gmod,
        }
    }
}

impl SedConfig {
    /// EM settings for one candidate; the seed depends only on the run seed,
    /// the variable and the edge set.
    pub fn em_config(&self, v: &NodeId, e: &BTreeSet<Edge>) -> EmConfig {
        let labels: Vec<String> = std::iter::once(v.to_string()).chain(e.iter().map(ToString::to_string)).collect();
        EmConfig {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            restarts: self.restarts,
            seed: seeds::derive(self.seed, &labels),
            warm_start: self.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub edge: String,
    pub noisy_variable: String,
    pub delta: f64,
    pub phase: u8,
    pub order: usize,
}

/// Search state between sweeps.
#[derive(Debug, Clone)]
pub struct SedState {
    pub g_mod: MixedGraph,
    pub cse: CseMap,
    pub v_m: Option<NodeId>,
    pub e_m: Option<Edge>,
    pub e_d: BTreeSet<Edge>,
    pub delta_max: f64,
    pub removal_log: Vec<Removal>,
    /// Variables whose candidate set was cleared after Phase 2.
    pub cleared: BTreeSet<NodeId>,
}

impl SedState {
    fn new(g: &MixedGraph) -> Self {
        SedState {
            g_mod: g.clone(),
            cse: build_cse(g),
            v_m: None,
            e_m: None,
            e_d: BTreeSet::new(),
            delta_max: 0.0,
            removal_log: Vec::new(),
            cleared: BTreeSet::new(),
        }
    }

    fn refresh_cse(&mut self) {
        self.cse = build_cse(&self.g_mod);
        self.cse.retain(|v, _| !self.cleared.contains(v));
    }

    fn remove(&mut self, edge: &Edge, v: &NodeId, delta: f64, phase: u8) {
        self.g_mod.remove_edge(edge.a.as_str(), edge.b.as_str()).expect("candidate edges are present in g_mod");
        self.removal_log.push(Removal {
            edge: edge.to_string(),
            noisy_variable: v.to_string(),
            delta,
            phase,
            order: self.removal_log.len(),
        });
        self.refresh_cse();
    }
}

#[derive(Debug, Clone)]
pub struct SedOutcome {
    pub graph: MixedGraph,
    pub log: Vec<Removal>,
    /// Distinct reconstructions scored.
    pub evaluations: usize,
}

type CandidateKey = (usize, NodeId, BTreeSet<Edge>);

/// Memoized candidate scoring against a small set of base graphs.
struct Evaluator<'a> {
    data: &'a Dataset,
    cfg: SedConfig,
    bases: Vec<(MixedGraph, BicScore)>,
    memo: HashMap<CandidateKey, f64>,
}

impl<'a> Evaluator<'a> {
    fn base_id(&mut self, g: &MixedGraph) -> Result<usize> {
        if let Some(i) = self.bases.iter().position(|(b, _)| b == g) {
            return Ok(i);
        }
        let score = bic_pdag(g, self.data, self.cfg.seed)?;
        self.bases.push((g.clone(), score));
        Ok(self.bases.len() - 1)
    }

    /// Δ for every candidate, in input order.
    fn deltas(&mut self, base: usize, cands: &[(NodeId, BTreeSet<Edge>)]) -> Result<Vec<f64>> {
        let todo: Vec<&(NodeId, BTreeSet<Edge>)> =
            cands.iter().filter(|(v, e)| !self.memo.contains_key(&(base, v.clone(), e.clone()))).collect();
        let (g, score_i) = &self.bases[base];
        let (data, cfg) = (self.data, self.cfg);
        let fresh: Vec<Result<f64>> = todo
            .par_iter()
            .map(|(v, e)| {
                reconstruction_with_base(g, v.as_str(), e, data, &cfg.em_config(v, e), cfg.seed, *score_i)
                    .map(|r| r.delta)
            })
            .collect();
        for ((v, e), d) in todo.into_iter().zip(fresh) {
            self.memo.insert((base, v.clone(), e.clone()), d?);
        }
        Ok(cands.iter().map(|(v, e)| self.memo[&(base, v.clone(), e.clone())]).collect())
    }
}

/// Index of the largest value; the earliest wins ties.
fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &d) in values.iter().enumerate() {
        if best.is_none_or(|b| d > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Removes edges that measurement error on a single variable explains
/// better than the graph itself, until no candidate improves BIC.
pub fn run_sed(g: &MixedGraph, data: &Dataset, cfg: &SedConfig) -> Result<SedOutcome> {
    for v in g.nodes() {
        data.require_column(v.as_str())?;
    }
    let mut st = SedState::new(g);
    let mut ev = Evaluator { data, cfg: *cfg, bases: Vec::new(), memo: HashMap::new() };

    while !st.cse.is_empty() {
        let base_graph = match cfg.base {
            BasePolicy::Gmod => st.g_mod.clone(),
            BasePolicy::Literal => g.clone(),
        };
        let base = ev.base_id(&base_graph)?;

        // phase 1: every (variable, edge) candidate
        let cands: Vec<(NodeId, BTreeSet<Edge>)> = st
            .cse
            .iter()
            .flat_map(|(v, es)| es.iter().map(move |e| (v.clone(), BTreeSet::from([e.clone()]))))
            .collect();
        let deltas = ev.deltas(base, &cands)?;
        let Some(best) = argmax(&deltas).filter(|&i| deltas[i] > 0.0) else {
            break;
        };
        let (v_m, e_set) = cands[best].clone();
        let e_m = e_set.into_iter().next().unwrap();
        st.remove(&e_m, &v_m, deltas[best], 1);
        st.v_m = Some(v_m.clone());
        st.e_m = Some(e_m.clone());
        st.e_d = BTreeSet::from([e_m]);
        st.delta_max = deltas[best];

        // phase 2: further edges explained by the same variable
        while let Some(es) = st.cse.get(&v_m).filter(|es| !es.is_empty()) {
            // every edge of g_mod is also in the base, so E_d ∪ {E} is removable there
            let cands: Vec<(NodeId, BTreeSet<Edge>)> = es
                .iter()
                .map(|e| {
                    let mut set = st.e_d.clone();
                    set.insert(e.clone());
                    (v_m.clone(), set)
                })
                .collect();
            let deltas = ev.deltas(base, &cands)?;
            let Some(best) = argmax(&deltas).filter(|&i| deltas[i] > st.delta_max) else {
                break;
            };
            let added: Edge = cands[best].1.difference(&st.e_d).next().unwrap().clone();
            st.remove(&added, &v_m, deltas[best], 2);
            st.e_d.insert(added.clone());
            st.e_m = Some(added);
            st.delta_max = deltas[best];
        }
        st.cleared.insert(v_m);
        st.refresh_cse();
    }

    Ok(SedOutcome { graph: st.g_mod, log: st.removal_log, evaluations: ev.memo.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;
    use crate::model::{corrupt, forward_sample, BayesNet, Cpt, NoiseChannel};

    fn five_node_dag() -> MixedGraph {
        parse_graph("A -> B\nA -> C\nA -> E\nB -> C\nB -> D\nB -> E\nC -> D").unwrap()
    }

    fn asia_clique() -> MixedGraph {
        parse_graph(
            "node xray\nasia -- tub\nsmoke -- lung\nsmoke -- bronc\nbronc -- dysp\ntub -> either\nlung -> either\nsmoke -- dysp",
        )
        .unwrap()
    }

    fn edges(g: &MixedGraph, list: &[(&str, &str)]) -> BTreeSet<Edge> {
        list.iter().map(|(a, b)| g.find_edge(a, b).unwrap()).collect()
    }

    fn id(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    #[test]
    fn cse_of_five_node_dag() {
        let g = five_node_dag();
        let cse = build_cse(&g);
        let want: CseMap = [
            ("A", vec![("B", "C"), ("B", "E")]),
            ("B", vec![("A", "C"), ("A", "E"), ("C", "D")]),
            ("C", vec![("A", "B"), ("B", "D")]),
            ("D", vec![("B", "C")]),
            ("E", vec![("A", "B")]),
        ]
        .into_iter()
        .map(|(v, es)| (id(v), edges(&g, &es)))
        .collect();
        assert_eq!(cse, want);
    }

    #[test]
    fn cse_of_asia_clique() {
        let g = asia_clique();
        let cse = build_cse(&g);
        assert_eq!(cse.len(), 3);
        assert_eq!(cse[&id("smoke")], edges(&g, &[("bronc", "dysp")]));
        assert_eq!(cse[&id("bronc")], edges(&g, &[("smoke", "dysp")]));
        assert_eq!(cse[&id("dysp")], edges(&g, &[("smoke", "bronc")]));
        assert!(build_cse(&parse_graph("A -> B\nB -> C\nC -- D").unwrap()).is_empty());
    }

    #[test]
    fn cse_matches_clique_definition() {
        for seed in 0..20 {
            let g = crate::testutil::random_dag(9, 0.45, seed);
            let cse = build_cse(&g);
            for v in 0..g.node_count() {
                for (a, b, _) in g.edge_list() {
                    let in_cse = cse.get(g.name(v)).is_some_and(|es| es.contains(&g.edge_at(a, b).unwrap()));
                    let clique = v != a && v != b && g.adjacent(v, a) && g.adjacent(v, b);
                    assert_eq!(in_cse, clique);
                }
            }
            assert!(cse.values().all(|es| !es.is_empty()));
        }
    }

    #[test]
    fn reconstructed_bronc_candidate() {
        let g = asia_clique();
        let g_r = reconstructed_graph(&g, "bronc", &edges(&g, &[("smoke", "dysp")])).unwrap();
        let want = parse_graph(
            "node xray\nasia -- tub\nsmoke -- lung\nsmoke -- bronc*\nbronc* -- dysp\ntub -> either\nlung -> either\nbronc* -> bronc",
        )
        .unwrap();
        assert_eq!(g_r, want);
    }

    #[test]
    fn reconstructed_structure() {
        for seed in 0..20 {
            let g = crate::graph::dag_to_cpdag(&crate::testutil::random_dag(8, 0.5, seed)).unwrap();
            let cse = build_cse(&g);
            for (v, es) in &cse {
                let e: BTreeSet<Edge> = es.iter().take(1).cloned().collect();
                let g_r = reconstructed_graph(&g, v.as_str(), &e).unwrap();
                let h = hidden_label(v);
                assert_eq!(g_r.parents(v.as_str()).unwrap(), vec![id(&h)]);
                assert_eq!(g_r.neighbors(v.as_str()).unwrap().len(), 1);
                let mut nb = g.neighbors(v.as_str()).unwrap();
                nb.insert(v.clone());
                assert_eq!(g_r.neighbors(&h).unwrap(), nb);
                assert_eq!(g_r.edge_count(), g.edge_count() + 1 - e.len());
            }
        }
    }

    #[test]
    fn reconstruction_errors() {
        let g = asia_clique();
        let data = Dataset::empty(g.nodes().iter().map(|n| Variable::with_arity(n.as_str(), 2).unwrap()).collect());
        let cfg = EmConfig::default();
        let touching = edges(&g, &[("smoke", "bronc")]);
        assert!(matches!(reconstruction(&g, "bronc", &touching, &data, &cfg, 0), Err(Error::InvalidCandidate(_))));
        let missing = BTreeSet::from([Edge::undirected(id("asia"), id("xray"))]);
        assert!(matches!(reconstruction(&g, "bronc", &missing, &data, &cfg, 0), Err(Error::EdgeNotFound(..))));
    }

    fn chain_data(n: usize, seed: u64) -> Dataset {
        let g = parse_graph("A -> B\nB -> C\nA -> D\nC -> F").unwrap();
        let v = |s| Variable::with_arity(s, 3).unwrap();
        let strong = vec![vec![0.85, 0.1, 0.05], vec![0.1, 0.8, 0.1], vec![0.05, 0.15, 0.8]];
        let bn = BayesNet::new(
            g,
            vec![v("A"), v("B"), v("C"), v("D"), v("F")],
            vec![
                Cpt::new(id("A"), vec![], vec![], vec![vec![0.3, 0.3, 0.4]]).unwrap(),
                Cpt::new(id("B"), vec![id("A")], vec![3], strong.clone()).unwrap(),
                Cpt::new(id("C"), vec![id("B")], vec![3], strong.clone()).unwrap(),
                Cpt::new(id("D"), vec![id("A")], vec![3], strong.clone()).unwrap(),
                Cpt::new(id("F"), vec![id("C")], vec![3], strong).unwrap(),
            ],
        )
        .unwrap();
        forward_sample(&bn, n, seed).unwrap()
    }

    #[test]
    fn empty_reconstruction_is_penalized_on_clean_data() {
        let data = chain_data(10_000, 5);
        let g = parse_graph("A -- B\nB -- C").unwrap();
        for v in ["A", "B", "C"] {
            let r = reconstruction(&g, v, &BTreeSet::new(), &data, &EmConfig::default(), 1).unwrap();
            assert!(r.delta <= 0.0, "{v}: {}", r.delta);
            assert!((r.delta - (r.score_r.value - r.score_i.value)).abs() < 1e-12);
        }
    }

    #[test]
    fn clique_free_graph_is_untouched() {
        let data = chain_data(500, 1);
        let g = parse_graph("A -- B\nB -- C").unwrap();
        let out = run_sed(&g, &data, &SedConfig::default()).unwrap();
        assert_eq!(out.graph, g);
        assert!(out.log.is_empty());
    }

    #[test]
    fn noisy_middle_removes_the_shortcut() {
        // B observed through 20% noise leaves A and C dependent given B
        let clean = chain_data(10_000, 3);
        let vars = clean.variables().to_vec();
        let noisy = corrupt(&clean, &NoiseChannel::symmetric(&vars, &[("B", 0.2)]).unwrap(), 4).unwrap();
        let g = parse_graph("D -- A\nA -- B\nB -- C\nA -- C\nC -- F").unwrap();
        let cfg = SedConfig { seed: 7, ..SedConfig::default() };
        let out = run_sed(&g, &noisy, &cfg).unwrap();
        assert_eq!(out.log.len(), 1, "{:?}", out.log);
        assert_eq!(out.log[0].noisy_variable, "B");
        assert_eq!(out.log[0].edge, "A -- C");
        assert!(out.log[0].delta > 0.0);
        assert_eq!(out.graph, parse_graph("D -- A\nA -- B\nB -- C\nC -- F").unwrap());

        let again = run_sed(&out.graph, &noisy, &cfg).unwrap();
        assert_eq!(again.graph, out.graph);
        assert!(again.log.is_empty());

        let repeat = run_sed(&g, &noisy, &cfg).unwrap();
        assert_eq!(repeat.log, out.log);
    }

    #[test]
    fn base_policy_parses() {
        assert_eq!("gmod".parse::<BasePolicy>().unwrap(), BasePolicy::Gmod);
        assert_eq!("literal".parse::<BasePolicy>().unwrap(), BasePolicy::Literal);
        assert!("g".parse::<BasePolicy>().is_err());
        let json = serde_json::to_string(&Removal {
            edge: "A -- C".into(),
            noisy_variable: "B".into(),
            delta: 1.5,
            phase: 1,
            order: 0,
        })
        .unwrap();
        assert_eq!(json, r#"{"edge":"A -- C","noisy_variable":"B","delta":1.5,"phase":1,"order":0}"#);
    }
}

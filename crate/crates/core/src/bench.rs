//! Factorial benchmark sweeps: sample, corrupt, learn, correct, evaluate.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{compare_cpdags, EvalReport};
use crate::graph::{dag_to_cpdag, write_graph, MixedGraph};
use crate::learn::{hill_climb, import_graph, HcConfig};
use crate::model::{corrupt, draw_noise_channel, forward_sample, random_bn, read_network, BayesNet, NoiseChannel};
use crate::sed::{run_sed, Removal, SedConfig};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkSpec {
    File { path: PathBuf },
    Random { name: String, nodes: usize, arity: usize, max_parents: usize, edge_prob: f64, seed: u64 },
}

impl NetworkSpec {
    pub fn name(&self) -> String {
        match self {
            NetworkSpec::File { path } => {
                path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
            }
            NetworkSpec::Random { name, .. } => name.clone(),
        }
    }

    pub fn load(&self) -> Result<BayesNet> {
        match self {
            NetworkSpec::File { path } => read_network(path),
            NetworkSpec::Random { nodes, arity, max_parents, edge_prob, seed, .. } => {
                random_bn(*nodes, *arity, *max_parents, *edge_prob, *seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Hc {
        #[serde(default = "default_max_parents")]
        max_parents: usize,
    },
    /// Graph files named by a pattern with `{network}`, `{n}`,
    /// `{replicate}` and `{condition}` placeholders.
    Imported { pattern: String },
}

fn default_max_parents() -> usize {
    HcConfig::default().max_parents
}

/// Noise applied to the sampled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSpec {
    /// A channel drawn per cell with rates bounded by `alpha_max`.
    Random { alpha_max: f64 },
    /// Fixed symmetric rates for the listed variables only.
    Fixed { rates: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub networks: Vec<NetworkSpec>,
    pub sample_sizes: Vec<usize>,
    pub noise: NoiseSpec,
    /// Replicate indices.
    pub seeds: Vec<u64>,
    pub learner: LearnerSpec,
    #[serde(default)]
    pub sed: SedConfig,
    #[serde(default)]
    pub run_seed: u64,
    /// Also run every cell on the error-free sample.
    #[serde(default = "yes")]
    pub control: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.networks.is_empty() || self.sample_sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument("bench needs networks, sample sizes and seeds".into()));
        }
        if self.sample_sizes.contains(&0) {
            return Err(Error::InvalidArgument("sample sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Noisy,
    Clean,
}

impl Condition {
    fn label(self) -> &'static str {
        match self {
            Condition::Noisy => "noisy",
            Condition::Clean => "clean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub network: String,
    pub n: usize,
    pub replicate: u64,
    pub cell_seed: u64,
    pub condition: Condition,
    pub original: EvalReport,
    pub modified: EvalReport,
    pub removals: Vec<Removal>,
    /// Learned CPDAG and SED output in the graph text format.
    pub original_graph: String,
    pub modified_graph: String,
    /// SED output edges are a subset of its input edges.
    pub edges_subset: bool,
}

pub fn cell_seed(run_seed: u64, network: &str, n: usize, replicate: u64) -> u64 {
    seeds::derive(run_seed, [network.as_bytes(), &n.to_le_bytes(), &replicate.to_le_bytes()])
}

fn fill_pattern(pattern: &str, network: &str, n: usize, replicate: u64, cond: Condition) -> String {
    pattern
        .replace("{network}", network)
        .replace("{n}", &n.to_string())
        .replace("{replicate}", &replicate.to_string())
        .replace("{condition}", cond.label())
}

fn edges_subset(out: &MixedGraph, input: &MixedGraph) -> bool {
    out.edge_set().is_subset(&input.edge_set())
}

struct Cell<'a> {
    network: String,
    bn: &'a BayesNet,
    truth: &'a MixedGraph,
    n: usize,
    replicate: u64,
}

/// Noisy (and optionally clean) results for one cell.
fn run_cell(cfg: &BenchConfig, cell: &Cell) -> Result<Vec<CellResult>> {
    let seed = cell_seed(cfg.run_seed, &cell.network, cell.n, cell.replicate);
    let sub = |tag: &str| seeds::derive(seed, [tag]);
    let clean = forward_sample(cell.bn, cell.n, sub("sample"))?;
    let channel = match &cfg.noise {
        NoiseSpec::Random { alpha_max } => draw_noise_channel(cell.bn.variables(), *alpha_max, sub("channel"))?,
        NoiseSpec::Fixed { rates } => {
            let rates: Vec<(&str, f64)> = rates.iter().map(|(k, &v)| (k.as_str(), v)).collect();
            NoiseChannel::symmetric(cell.bn.variables(), &rates)?
        }
    };
    let noisy = corrupt(&clean, &channel, sub("corrupt"))?;

    let mut conditions = vec![(Condition::Noisy, noisy)];
    if cfg.control {
        conditions.push((Condition::Clean, clean));
    }
    conditions
        .into_iter()
        .map(|(cond, data)| {
            let learned = learn(cfg, cell, cond, &data, sub("learn"))?;
            let original = dag_to_cpdag_or_keep(&learned)?;
            let sed_cfg = SedConfig { seed: sub("sed"), ..cfg.sed };
            let out = run_sed(&original, &data, &sed_cfg)?;
            Ok(CellResult {
                network: cell.network.clone(),
                n: cell.n,
                replicate: cell.replicate,
                cell_seed: seed,
                condition: cond,
                original: compare_cpdags(&original, cell.truth)?,
                modified: compare_cpdags(&out.graph, cell.truth)?,
                edges_subset: edges_subset(&out.graph, &original),
                original_graph: write_graph(&original),
                modified_graph: write_graph(&out.graph),
                removals: out.log,
            })
        })
        .collect()
}

fn learn(cfg: &BenchConfig, cell: &Cell, cond: Condition, data: &Dataset, seed: u64) -> Result<MixedGraph> {
    match &cfg.learner {
        LearnerSpec::Hc { max_parents } => {
            hill_climb(data, &HcConfig { max_parents: *max_parents, seed, ..HcConfig::default() })
        }
        LearnerSpec::Imported { pattern } => {
            import_graph(fill_pattern(pattern, &cell.network, cell.n, cell.replicate, cond), data.variables())
        }
    }
}

/// CPDAG of a DAG; partially directed inputs are used as given.
fn dag_to_cpdag_or_keep(g: &MixedGraph) -> Result<MixedGraph> {
    if g.is_dag() {
        dag_to_cpdag(g)
    } else {
        Ok(g.clone())
    }
}

/// Runs the full factorial design on up to `jobs` threads. Results come back
/// in (network, n, replicate, condition) order regardless of `jobs`.
pub fn run_bench(cfg: &BenchConfig, jobs: usize) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let nets: Vec<(String, BayesNet, MixedGraph)> = cfg
        .networks
        .iter()
        .map(|spec| {
            let bn = spec.load()?;
            let truth = dag_to_cpdag(bn.graph())?;
            Ok((spec.name(), bn, truth))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<Cell> = nets
        .iter()
        .flat_map(|(name, bn, truth)| {
            cfg.sample_sizes.iter().flat_map(move |&n| {
                cfg.seeds.iter().map(move |&replicate| Cell { network: name.clone(), bn, truth, n, replicate })
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let results: Vec<Result<Vec<CellResult>>> = pool.install(|| cells.par_iter().map(|c| run_cell(cfg, c)).collect());
    Ok(results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// One JSON object per line.
pub fn to_json_lines(results: &[CellResult]) -> String {
    results.iter().map(|r| serde_json::to_string(r).expect("results serialize") + "\n").collect()
}

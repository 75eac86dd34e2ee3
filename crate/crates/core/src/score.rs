//! Log-likelihood and BIC for complete-data DAGs, and for reconstruction
//! graphs with one hidden variable (via EM).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{counts_idx, Dataset, SufficientStats, Variable};
use crate::em::{em_fit, EmConfig, EmResult};
use crate::error::{Error, Result};
use crate::graph::{cpdag_to_dag, MixedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicScore {
    pub loglik: f64,
    pub dim: usize,
    pub n: usize,
    pub value: f64,
}

impl BicScore {
    pub fn new(loglik: f64, dim: usize, n: usize) -> Self {
        BicScore { loglik, dim, n, value: loglik - penalty(n, dim) }
    }
}

/// `½ · ln(N) · d`
pub fn penalty(n: usize, dim: usize) -> f64 {
    0.5 * (n as f64).ln() * dim as f64
}

/// `Σ_jk N_ijk · ln(N_ijk / N_ij)`, zero counts contributing nothing.
pub fn family_loglik(stats: &SufficientStats) -> f64 {
    let r = stats.child_card;
    stats
        .counts
        .chunks(r)
        .map(|row| {
            let nij: u64 = row.iter().sum();
            row.iter().filter(|&&c| c > 0).map(|&c| c as f64 * (c as f64 / nij as f64).ln()).sum::<f64>()
        })
        .sum()
}

pub fn family_dim(stats: &SufficientStats) -> usize {
    (stats.child_card - 1) * stats.q()
}

/// Column index of every graph node.
pub(crate) fn column_map(g: &MixedGraph, data: &Dataset) -> Result<Vec<usize>> {
    g.nodes().iter().map(|v| data.require_column(v.as_str())).collect()
}

fn dag_families(g: &MixedGraph, data: &Dataset) -> Result<Vec<SufficientStats>> {
    if !g.is_dag() {
        return Err(Error::NotADag);
    }
    let cols = column_map(g, data)?;
    Ok((0..g.node_count())
        .map(|v| {
            let parents: Vec<usize> = g.parents_idx(v).into_iter().map(|p| cols[p]).collect();
            counts_idx(data, cols[v], &parents)
        })
        .collect())
}

/// Maximum-likelihood log-likelihood of a DAG on complete data.
pub fn loglik_complete(g: &MixedGraph, data: &Dataset) -> Result<f64> {
    Ok(dag_families(g, data)?.iter().map(family_loglik).sum())
}

fn bic_dag(g: &MixedGraph, data: &Dataset) -> Result<BicScore> {
    if data.n_rows() == 0 {
        return Err(Error::InvalidArgument("BIC needs at least one record".into()));
    }
    let fams = dag_families(g, data)?;
    let ll = fams.iter().map(family_loglik).sum();
    let dim = fams.iter().map(family_dim).sum();
    Ok(BicScore::new(ll, dim, data.n_rows()))
}

/// BIC of a DAG, or of a CPDAG through its seeded extension.
pub fn bic_complete(g: &MixedGraph, data: &Dataset, seed: u64) -> Result<BicScore> {
    if g.is_dag() {
        bic_dag(g, data)
    } else {
        bic_dag(&cpdag_to_dag(g, seed)?, data)
    }
}

/// BIC of any partially directed graph via [`MixedGraph::scoring_dag`].
pub fn bic_pdag(g: &MixedGraph, data: &Dataset, seed: u64) -> Result<BicScore> {
    bic_dag(&g.scoring_dag(seed)?, data)
}

/// BIC of a DAG containing the single hidden node `hidden` (absent from
/// `data`). The log-likelihood is EM's best converged value and the
/// dimension counts the hidden node's families like observed ones.
pub fn bic_hidden(g_r: &MixedGraph, hidden: &Variable, data: &Dataset, cfg: &EmConfig) -> Result<(BicScore, EmResult)> {
    if data.n_rows() == 0 {
        return Err(Error::InvalidArgument("BIC needs at least one record".into()));
    }
    let em = em_fit(g_r, hidden, data, cfg)?;
    let h = g_r.require(hidden.name.as_str())?;
    let card = |v: usize| {
        if v == h {
            hidden.cardinality()
        } else {
            data.variable(g_r.name(v).as_str()).map_or(0, Variable::cardinality)
        }
    };
    let dim = (0..g_r.node_count())
        .map(|v| (card(v) - 1) * g_r.parents_idx(v).into_iter().map(card).product::<usize>())
        .sum();
    Ok((BicScore::new(em.loglik, dim, data.n_rows()), em))
}

/// Memoized family scores keyed by column indices.
#[derive(Debug, Default)]
pub struct FamilyCache {
    scores: HashMap<(usize, Vec<usize>), (f64, usize)>,
}

impl FamilyCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// `(loglik, dim)` of `child | parents`; `parents` must be sorted.
    pub fn family(&mut self, data: &Dataset, child: usize, parents: &[usize]) -> (f64, usize) {
        *self.scores.entry((child, parents.to_vec())).or_insert_with(|| {
            let s = counts_idx(data, child, parents);
            (family_loglik(&s), family_dim(&s))
        })
    }

    /// BIC contribution of one family.
    pub fn family_bic(&mut self, data: &Dataset, child: usize, parents: &[usize]) -> f64 {
        let (ll, dim) = self.family(data, child, parents);
        ll - penalty(data.n_rows(), dim)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

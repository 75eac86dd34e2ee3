//! Measurement-error channel `P(V^o | V)`.
//!
//! Row `l` of a variable's channel has `1 - α^l` on the diagonal and the
//! remaining mass `α^l` spread over the other states. The variable's error
//! rate is `α = max_l α^l`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{flat_dirichlet, sample_index, Variable};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::seeds;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableChannel {
    pub name: NodeId,
    pub alpha: f64,
    pub alpha_l: Vec<f64>,
    /// `rows[l][k] = P(V^o = k | V = l)`
    pub rows: Vec<Vec<f64>>,
}

impl VariableChannel {
    pub fn identity(var: &Variable) -> Self {
        let r = var.cardinality();
        let rows = (0..r).map(|l| (0..r).map(|k| if k == l { 1.0 } else { 0.0 }).collect()).collect();
        VariableChannel { name: var.name.clone(), alpha: 0.0, alpha_l: vec![0.0; r], rows }
    }

    /// Every state flips with probability `rate`, spread evenly over the
    /// other states.
    pub fn symmetric(var: &Variable, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("error rate {rate} outside [0, 1]")));
        }
        let r = var.cardinality();
        let off = rate / (r - 1) as f64;
        let rows = (0..r).map(|l| (0..r).map(|k| if k == l { 1.0 - rate } else { off }).collect()).collect();
        Ok(VariableChannel { name: var.name.clone(), alpha: rate, alpha_l: vec![rate; r], rows })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SchemaMismatch(format!("channel of `{}`: {m}", self.name)));
        let r = self.rows.len();
        if self.alpha_l.len() != r || r < 2 {
            return bad("state count mismatch");
        }
        for (l, row) in self.rows.iter().enumerate() {
            if row.len() != r || row.iter().any(|p| !(0.0..=1.0 + TOL).contains(p)) {
                return bad("malformed row");
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > TOL {
                return bad("row does not sum to 1");
            }
            if (row[l] - (1.0 - self.alpha_l[l])).abs() > TOL {
                return bad("diagonal differs from 1 - alpha_l");
            }
        }
        let max = self.alpha_l.iter().copied().fold(0.0, f64::max);
        if (max - self.alpha).abs() > TOL {
            return bad("alpha is not the maximum state error rate");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannel {
    pub variables: Vec<VariableChannel>,
}

impl NoiseChannel {
    pub fn identity(vars: &[Variable]) -> Self {
        NoiseChannel { variables: vars.iter().map(VariableChannel::identity).collect() }
    }

    /// Symmetric channel with the given rate on the named variables and the
    /// identity elsewhere.
    pub fn symmetric(vars: &[Variable], rates: &[(&str, f64)]) -> Result<Self> {
        for (name, _) in rates {
            if !vars.iter().any(|v| v.name.as_str() == *name) {
                return Err(Error::NodeNotFound(name.to_string()));
            }
        }
        let variables = vars
            .iter()
            .map(|v| match rates.iter().find(|(n, _)| *n == v.name.as_str()) {
                Some(&(_, rate)) => VariableChannel::symmetric(v, rate),
                None => Ok(VariableChannel::identity(v)),
            })
            .collect::<Result<_>>()?;
        Ok(NoiseChannel { variables })
    }

    pub fn get(&self, name: &str) -> Option<&VariableChannel> {
        self.variables.iter().find(|c| c.name.as_str() == name)
    }

    pub fn validate(&self) -> Result<()> {
        self.variables.iter().try_for_each(VariableChannel::validate)
    }
}

/// Random channel for every variable: `α_i ~ U(0, alpha_max]`, per-state
/// `α_i^l ~ U(0, α_i]` rescaled so the largest equals `α_i`, and the
/// off-diagonal mass of row `l` split as `α_i^l · Dir(1, …, 1)`.
pub fn draw_noise_channel(vars: &[Variable], alpha_max: f64, seed: u64) -> Result<NoiseChannel> {
    if !(0.0..=1.0).contains(&alpha_max) {
        return Err(Error::InvalidArgument(format!("alpha_max {alpha_max} outside [0, 1]")));
    }
    if alpha_max == 0.0 {
        return Ok(NoiseChannel::identity(vars));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut variables = Vec::with_capacity(vars.len());
    for var in vars {
        let r = var.cardinality();
        let alpha = alpha_max * (1.0 - rng.gen::<f64>());
        let mut alpha_l: Vec<f64> = (0..r).map(|_| alpha * (1.0 - rng.gen::<f64>())).collect();
        let max = alpha_l.iter().copied().fold(0.0, f64::max);
        for a in &mut alpha_l {
            *a *= alpha / max;
        }
        let mut rows = Vec::with_capacity(r);
        for (l, &al) in alpha_l.iter().enumerate() {
            let split = flat_dirichlet(&mut rng, r - 1);
            let mut row = Vec::with_capacity(r);
            let mut it = split.into_iter();
            for k in 0..r {
                row.push(if k == l { 1.0 - al } else { al * it.next().unwrap() });
            }
            rows.push(row);
        }
        variables.push(VariableChannel { name: var.name.clone(), alpha, alpha_l, rows });
    }
    Ok(NoiseChannel { variables })
}

/// Resamples every cell through its variable's channel row. Each column
/// uses its own random stream derived from `seed` and the column name.
pub fn corrupt(data: &Dataset, ch: &NoiseChannel, seed: u64) -> Result<Dataset> {
    if ch.variables.len() != data.variables().len() {
        return Err(Error::SchemaMismatch("channel and dataset have different variables".into()));
    }
    let mut columns = Vec::with_capacity(data.variables().len());
    for (i, var) in data.variables().iter().enumerate() {
        let vc =
            ch.get(var.name.as_str()).ok_or_else(|| Error::SchemaMismatch(format!("no channel for `{}`", var.name)))?;
        if vc.rows.len() != var.cardinality() {
            return Err(Error::SchemaMismatch(format!("channel of `{}` has the wrong state count", var.name)));
        }
        let col = data.column(i);
        if vc.alpha == 0.0 {
            columns.push(col.to_vec());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, [var.name.as_str()]));
        columns.push(col.iter().map(|&x| sample_index(&mut rng, &vc.rows[usize::from(x)]) as u16).collect());
    }
    Dataset::from_columns(data.variables().to_vec(), columns)
}

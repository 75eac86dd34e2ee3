//! Categorical datasets, CSV ingestion and family sufficient statistics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// A categorical variable with an ordered list of state labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: NodeId,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: &str, states: &[&str]) -> Result<Self> {
        Self::from_labels(NodeId::new(name)?, states.iter().map(|s| s.to_string()).collect())
    }

    pub fn from_labels(name: NodeId, states: Vec<String>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::SchemaMismatch(format!("variable `{name}` needs at least two states")));
        }
        for (i, s) in states.iter().enumerate() {
            if s.is_empty() || s.contains(',') || states[..i].contains(s) {
                return Err(Error::SchemaMismatch(format!("bad or duplicate state `{s}` in `{name}`")));
            }
        }
        Ok(Variable { name, states })
    }

    /// Variable with states `s0, s1, …`.
    pub fn with_arity(name: &str, arity: usize) -> Result<Self> {
        Self::from_labels(NodeId::new(name)?, (0..arity).map(|k| format!("s{k}")).collect())
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// Column-major table of state codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    variables: Vec<Variable>,
    columns: Vec<Vec<u16>>,
    n: usize,
}

impl Dataset {
    pub fn empty(variables: Vec<Variable>) -> Self {
        let columns = vec![Vec::new(); variables.len()];
        Dataset { variables, columns, n: 0 }
    }

    pub fn from_columns(variables: Vec<Variable>, columns: Vec<Vec<u16>>) -> Result<Self> {
        if variables.len() != columns.len() {
            return Err(Error::SchemaMismatch("column count differs from schema".into()));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (v, col) in variables.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::SchemaMismatch("ragged columns".into()));
            }
            if col.iter().any(|&x| usize::from(x) >= v.cardinality()) {
                return Err(Error::SchemaMismatch(format!("state code out of range in `{}`", v.name)));
            }
        }
        Ok(Dataset { variables, columns, n })
    }

    pub fn push_row(&mut self, row: &[u16]) -> Result<()> {
        if row.len() != self.variables.len() {
            return Err(Error::SchemaMismatch("row length differs from schema".into()));
        }
        for (v, &x) in self.variables.iter().zip(row) {
            if usize::from(x) >= v.cardinality() {
                return Err(Error::SchemaMismatch(format!("state code out of range in `{}`", v.name)));
            }
        }
        for (col, &x) in self.columns.iter_mut().zip(row) {
            col.push(x);
        }
        self.n += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.column_index(name).map(|i| &self.variables[i])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name.as_str() == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name).ok_or_else(|| Error::NodeNotFound(name.to_string()))
    }

    pub fn column(&self, i: usize) -> &[u16] {
        &self.columns[i]
    }

    pub fn row(&self, r: usize) -> Vec<u16> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality()
    }

    /// Rows in the given order (indices may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
        Dataset { variables: self.variables.clone(), columns, n: rows.len() }
    }

    pub fn with_column_replaced(&self, i: usize, column: Vec<u16>) -> Result<Dataset> {
        let mut columns = self.columns.clone();
        columns[i] = column;
        Dataset::from_columns(self.variables.clone(), columns)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in 0..self.n {
            for (i, (v, col)) in self.variables.iter().zip(&self.columns).enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", v.states[usize::from(col[r])]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Parses a CSV table. With `schema`, state order is taken from it and
/// unknown labels are rejected; otherwise states are numbered in order of
/// first occurrence.
pub fn parse_csv(text: &str, schema: Option<&[Variable]>) -> Result<Dataset> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, header) = lines.next().ok_or(Error::ParseError { line: 1, msg: "missing header".into() })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    for name in &names {
        if name.contains('"') {
            return Err(Error::ParseError { line: 1, msg: "quoted fields are not supported".into() });
        }
        NodeId::new(*name).map_err(|_| Error::ParseError { line: 1, msg: format!("invalid column name `{name}`") })?;
    }
    let fixed: Option<Vec<Variable>> = match schema {
        Some(vars) => {
            if vars.len() != names.len() {
                return Err(Error::SchemaMismatch("CSV header does not match network variables".into()));
            }
            let cols = names
                .iter()
                .map(|n| {
                    vars.iter()
                        .find(|v| v.name.as_str() == *n)
                        .cloned()
                        .ok_or_else(|| Error::SchemaMismatch(format!("column `{n}` not in network")))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(cols)
        }
        None => None,
    };

    let mut seen: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    let mut lookup: Vec<HashMap<String, u16>> = vec![HashMap::new(); names.len()];
    let mut columns: Vec<Vec<u16>> = vec![Vec::new(); names.len()];
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(Error::ParseError {
                line,
                msg: format!("expected {} fields, found {}", names.len(), cells.len()),
            });
        }
        for (c, cell) in cells.iter().enumerate() {
            if cell.contains('"') || cell.is_empty() {
                return Err(Error::ParseError { line, msg: format!("invalid cell `{cell}`") });
            }
            let code = match &fixed {
                Some(vars) => vars[c]
                    .state_index(cell)
                    .ok_or_else(|| Error::UnknownState { column: names[c].to_string(), value: cell.to_string() })?,
                None => match lookup[c].get(*cell) {
                    Some(&k) => usize::from(k),
                    None => {
                        let k = seen[c].len();
                        seen[c].push(cell.to_string());
                        lookup[c].insert(cell.to_string(), k as u16);
                        k
                    }
                },
            };
            columns[c].push(code as u16);
        }
    }

    let variables = match fixed {
        Some(vars) => vars,
        None => names
            .iter()
            .zip(seen)
            .map(|(name, mut states)| {
                // a column that only ever shows one label still needs r >= 2
                while states.len() < 2 {
                    let filler = format!("_unseen{}", states.len());
                    states.push(filler);
                }
                Variable::from_labels(NodeId::new(*name)?, states)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Dataset::from_columns(variables, columns)
}

pub fn read_csv(path: impl AsRef<Path>, schema: Option<&[Variable]>) -> Result<Dataset> {
    parse_csv(&std::fs::read_to_string(path)?, schema)
}

/// Counts `N_ijk` for one family. Parent configurations are indexed in
/// mixed radix with the last parent varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SufficientStats {
    pub child_card: usize,
    pub parent_cards: Vec<usize>,
    /// Row-major `q × r` table.
    pub counts: Vec<u64>,
}

impl SufficientStats {
    pub fn q(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn n_ijk(&self, j: usize, k: usize) -> u64 {
        self.counts[j * self.child_card + k]
    }

    pub fn n_ij(&self, j: usize) -> u64 {
        self.row(j).iter().sum()
    }

    pub fn row(&self, j: usize) -> &[u64] {
        &self.counts[j * self.child_card..(j + 1) * self.child_card]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Mixed-radix index of a parent configuration, last parent fastest.
pub fn config_index(states: impl IntoIterator<Item = usize>, cards: &[usize]) -> usize {
    states.into_iter().zip(cards).fold(0, |acc, (s, &c)| acc * c + s)
}

/// Counts by column indices.
pub fn counts_idx(data: &Dataset, child: usize, parents: &[usize]) -> SufficientStats {
    let child_card = data.cardinality(child);
    let parent_cards: Vec<usize> = parents.iter().map(|&p| data.cardinality(p)).collect();
    let q: usize = parent_cards.iter().product();
    let mut counts = vec![0u64; q * child_card];
    let child_col = data.column(child);
    let mut row_idx = vec![0usize; data.n_rows()];
    for (&p, &card) in parents.iter().zip(&parent_cards) {
        for (acc, &x) in row_idx.iter_mut().zip(data.column(p)) {
            *acc = *acc * card + usize::from(x);
        }
    }
    for (j, &k) in row_idx.iter().zip(child_col) {
        counts[j * child_card + usize::from(k)] += 1;
    }
    SufficientStats { child_card, parent_cards, counts }
}

/// Counts for the family `child | parents`, by column name.
pub fn counts(data: &Dataset, child: &str, parents: &[&str]) -> Result<SufficientStats> {
    let c = data.require_column(child)?;
    let ps = parents.iter().map(|p| data.require_column(p)).collect::<Result<Vec<_>>>()?;
    Ok(counts_idx(data, c, &ps))
}

//! JSON network files.
//!
//! ```json
//! {
//!   "variables": [{"name": "A", "states": ["no", "yes"]}, …],
//!   "edges": [["A", "B"], …],
//!   "cpts": {"B": {"parents": ["A"], "table": [[0.9, 0.1], [0.2, 0.8]]}, …}
//! }
//! ```
//!
//! Table rows follow the mixed-radix parent index with the last parent
//! varying fastest; columns follow the child's state order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BayesNet, Cpt, Variable};
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, NodeId};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub variables: Vec<VariableEntry>,
    pub edges: Vec<(String, String)>,
    pub cpts: BTreeMap<String, CptEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableEntry {
    pub name: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CptEntry {
    pub parents: Vec<String>,
    pub table: Vec<Vec<f64>>,
}

impl NetworkFile {
    pub fn into_bayes_net(self) -> Result<BayesNet> {
        let variables: Vec<Variable> = self
            .variables
            .into_iter()
            .map(|v| Variable::from_labels(NodeId::new(v.name)?, v.states))
            .collect::<Result<_>>()?;
        let mut graph = MixedGraph::with_nodes(variables.iter().map(|v| v.name.as_str().to_string()))?;
        for (a, b) in &self.edges {
            let (ia, ib) = (graph.require(a)?, graph.require(b)?);
            graph.add_directed(ia, ib)?;
        }
        if !graph.is_dag() {
            return Err(Error::NotADag);
        }
        let card = |name: &str| {
            variables
                .iter()
                .find(|v| v.name.as_str() == name)
                .map(Variable::cardinality)
                .ok_or_else(|| Error::NodeNotFound(name.to_string()))
        };
        let mut cpts = Vec::with_capacity(self.cpts.len());
        for (child, entry) in self.cpts {
            let parent_cards = entry.parents.iter().map(|p| card(p)).collect::<Result<Vec<_>>>()?;
            let parents = entry.parents.into_iter().map(NodeId::new).collect::<Result<Vec<_>>>()?;
            cpts.push(Cpt::new(NodeId::new(child)?, parents, parent_cards, entry.table)?);
        }
        BayesNet::new(graph, variables, cpts)
    }

    pub fn from_bayes_net(bn: &BayesNet) -> Self {
        let g = bn.graph();
        NetworkFile {
            variables: bn
                .variables()
                .iter()
                .map(|v| VariableEntry { name: v.name.to_string(), states: v.states.clone() })
                .collect(),
            edges: g.edge_list().into_iter().map(|(a, b, _)| (g.name(a).to_string(), g.name(b).to_string())).collect(),
            cpts: bn
                .cpts()
                .iter()
                .map(|c| {
                    let entry = CptEntry {
                        parents: c.parents.iter().map(ToString::to_string).collect(),
                        table: c.table.clone(),
                    };
                    (c.child.to_string(), entry)
                })
                .collect(),
        }
    }
}

pub fn parse_network(text: &str) -> Result<BayesNet> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| Error::ParseError { line: e.line(), msg: e.to_string() })?;
    file.into_bayes_net()
}

pub fn read_network(path: impl AsRef<Path>) -> Result<BayesNet> {
    parse_network(&std::fs::read_to_string(path)?)
}

pub fn write_network(bn: &BayesNet) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_bayes_net(bn)).expect("network serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_bn;

    #[test]
    fn round_trip() {
        let bn = random_bn(6, 3, 2, 0.5, 2).unwrap();
        let back = parse_network(&write_network(&bn)).unwrap();
        assert_eq!(back, bn);
    }

    #[test]
    fn parent_order_from_file() {
        let text = r#"{
            "variables": [{"name": "A", "states": ["a0", "a1"]},
                          {"name": "B", "states": ["b0", "b1", "b2"]},
                          {"name": "C", "states": ["c0", "c1"]}],
            "edges": [["A", "C"], ["B", "C"]],
            "cpts": {
              "A": {"parents": [], "table": [[0.5, 0.5]]},
              "B": {"parents": [], "table": [[0.2, 0.3, 0.5]]},
              "C": {"parents": ["B", "A"], "table": [[1,0],[0,1],[1,0],[0,1],[1,0],[0,1]]}
            }}"#;
        let bn = parse_network(text).unwrap();
        let c = bn.cpt("C").unwrap();
        assert_eq!(c.parent_cards, vec![3, 2]);
        // B = b2, A = a1 -> row 2 * 2 + 1
        assert_eq!(c.row_index(&[2, 1]), 5);
        assert_eq!(c.prob(&[2, 1], 1), 1.0);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(parse_network("{"), Err(Error::ParseError { .. })));
        let cyclic = r#"{"variables": [{"name": "A", "states": ["0","1"]}, {"name": "B", "states": ["0","1"]}],
            "edges": [["A","B"],["B","A"]], "cpts": {}}"#;
        assert!(parse_network(cyclic).is_err());
    }
}

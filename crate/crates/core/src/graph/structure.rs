use std::collections::BTreeMap;
use std::fmt;

use super::{GraphError, ModelGraph};
use crate::frontend::IndexTerm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockClass {
    IidBlock,
    Recurrence,
    DbnBlock,
    General,
}

impl fmt::Display for BlockClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockClass::IidBlock => "IID_BLOCK",
            BlockClass::Recurrence => "RECURRENCE",
            BlockClass::DbnBlock => "DBN_BLOCK",
            BlockClass::General => "GENERAL",
        })
    }
}

/// Statements sharing a time axis (last index) and replication axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub time_index: String,
    pub replication: Vec<String>,
    pub class: BlockClass,
    /// Member variables in within-slice order.
    pub members: Vec<String>,
    /// Statements whose lhs is all index variables, in topological order.
    pub transitions: Vec<usize>,
    /// Statements of member variables with some literal lhs position.
    pub boundary: Vec<usize>,
    pub max_lag: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    /// Unindexed variables in topological order.
    pub parameters: Vec<String>,
    pub groups: Vec<GroupReport>,
    /// Indexed statements outside every group (variables with no named axis).
    pub loose: Vec<usize>,
}

impl StructureReport {
    pub fn group_of(&self, var: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.members.iter().any(|m| m == var))
    }
}

pub fn detect_structure(graph: &ModelGraph, topo: &[usize]) -> Result<StructureReport, GraphError> {
    let mut parameters = Vec::new();
    let mut keyed: BTreeMap<(String, Vec<String>), Vec<usize>> = BTreeMap::new();
    let mut loose = Vec::new();
    let mut group_key_of_var: BTreeMap<&str, (String, Vec<String>)> = BTreeMap::new();
    for &n in topo {
        let node = &graph.nodes[n];
        let info = &graph.vars[&node.var];
        if !info.is_indexed() {
            if !parameters.contains(&node.var) {
                parameters.push(node.var.clone());
            }
            continue;
        }
        let dims = &info.shape.dims;
        if dims.iter().any(Option::is_none) {
            loose.push(n);
            continue;
        }
        let names: Vec<String> = dims.iter().map(|d| d.clone().unwrap()).collect();
        let key = (names.last().unwrap().clone(), names[..names.len() - 1].to_vec());
        group_key_of_var.insert(&node.var, key.clone());
        keyed.entry(key).or_default().push(n);
    }

    let keys: Vec<(String, Vec<String>)> = keyed.keys().cloned().collect();
    let mut groups = Vec::new();
    for key in &keys {
        let nodes = &keyed[key];
        let mut transitions = Vec::new();
        let mut boundary = Vec::new();
        for &n in nodes {
            if graph.nodes[n].stmt.lhs.index.iter().all(|t| matches!(t, IndexTerm::Var(_))) {
                transitions.push(n);
            } else {
                boundary.push(n);
            }
        }
        let mut members: Vec<String> = Vec::new();
        for &n in transitions.iter().chain(&boundary) {
            if !members.contains(&graph.nodes[n].var) {
                members.push(graph.nodes[n].var.clone());
            }
        }
        let mut general = false;
        let mut max_lag = 0;
        let mut self_only = true;
        for &n in &transitions {
            let node = &graph.nodes[n];
            let lhs = &node.stmt.lhs.index;
            for dep in &node.deps {
                if group_key_of_var.get(dep.target.as_str()) != Some(key) {
                    continue;
                }
                let arity = lhs.len();
                let aligned = dep.terms.len() == arity
                    && dep.terms[..arity - 1].iter().zip(&lhs[..arity - 1]).all(|(a, b)| a == b)
                    && match (&dep.terms[arity - 1], &lhs[arity - 1]) {
                        (IndexTerm::Var(a), IndexTerm::Var(b)) => a == b,
                        (IndexTerm::Lag { name, .. }, IndexTerm::Var(b)) => name == b,
                        _ => false,
                    };
                if !aligned {
                    general = true;
                }
                if let IndexTerm::Lag { offset, .. } = &dep.terms[arity - 1] {
                    max_lag = max_lag.max(*offset);
                    if dep.target != node.var {
                        self_only = false;
                    }
                }
            }
        }
        let stochastic_single =
            members.len() == 1 && transitions.iter().all(|&n| graph.nodes[n].kind == super::NodeKind::Stochastic);
        let class = if general {
            BlockClass::General
        } else if max_lag == 0 {
            BlockClass::IidBlock
        } else if stochastic_single && self_only {
            BlockClass::Recurrence
        } else {
            BlockClass::DbnBlock
        };
        groups.push(GroupReport {
            time_index: key.0.clone(),
            replication: key.1.clone(),
            class,
            members,
            transitions,
            boundary,
            max_lag,
        });
    }

    // Groups that read each other in both directions cannot be evaluated
    // block by block.
    let g = groups.len();
    let mut reads = vec![vec![false; g]; g];
    for (a, group) in groups.iter().enumerate() {
        for &n in group.transitions.iter().chain(&group.boundary) {
            for dep in &graph.nodes[n].deps {
                if let Some(k) = group_key_of_var.get(dep.target.as_str()) {
                    let b = keys.iter().position(|x| x == k).unwrap();
                    if b != a {
                        reads[a][b] = true;
                    }
                }
            }
        }
    }
    for k in 0..g {
        for i in 0..g {
            for j in 0..g {
                if reads[i][k] && reads[k][j] {
                    reads[i][j] = true;
                }
            }
        }
    }
    for (a, group) in groups.iter_mut().enumerate() {
        if reads[a][a] {
            group.class = BlockClass::General;
        }
    }
    Ok(StructureReport { parameters, groups, loose })
}

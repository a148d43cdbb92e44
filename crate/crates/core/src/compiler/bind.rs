use std::collections::BTreeMap;

use super::CompileError;
use crate::data::DataTable;
use crate::frontend::{Expr, IndexTerm, ProgramAst, StmtKind, VarRef};
use crate::graph::{ConcreteGraph, ModelGraph, NodeKind, VarShape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteStatus {
    LatentParam,
    Observed(f64),
    MissingImputed,
    Deterministic,
}

impl SiteStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SiteStatus::LatentParam => "LATENT_PARAM",
            SiteStatus::Observed(_) => "OBSERVED",
            SiteStatus::MissingImputed => "MISSING_IMPUTED",
            SiteStatus::Deterministic => "DETERMINISTIC",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteBinding {
    pub var: String,
    pub tuple: Vec<i64>,
    /// Global instance id.
    pub instance: usize,
    pub node: usize,
    pub status: SiteStatus,
}

impl SiteBinding {
    pub fn name(&self) -> String {
        site_name(&self.var, &self.tuple)
    }
}

/// `y[5]`, `A[3,12]`, or the bare name for scalars.
pub fn site_name(var: &str, tuple: &[i64]) -> String {
    if tuple.is_empty() {
        var.to_string()
    } else {
        let parts: Vec<String> = tuple.iter().map(|v| v.to_string()).collect();
        format!("{var}[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputArray {
    pub shape: VarShape,
    pub values: Vec<f64>,
}

/// Dense copies of every input column the program reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputArrays {
    pub arrays: BTreeMap<String, InputArray>,
}

fn input_arity(ast: &ProgramAst, input: &str) -> Option<usize> {
    fn in_terms(terms: &[IndexTerm], input: &str) -> bool {
        terms.iter().any(|t| match t {
            IndexTerm::Lookup { input: i, inner } => i == input || in_terms(std::slice::from_ref(inner), input),
            _ => false,
        })
    }
    fn in_expr(e: &Expr, input: &str, out: &mut Option<usize>) {
        let mut refs: Vec<&VarRef> = Vec::new();
        e.collect_refs(&mut refs);
        for r in refs {
            if r.name == input {
                *out = Some(r.index.len());
            }
            if in_terms(&r.index, input) {
                *out = Some(1);
            }
        }
    }
    let mut out = None;
    for s in &ast.statements {
        match &s.kind {
            StmtKind::Assign(e) => in_expr(e, input, &mut out),
            StmtKind::Sample(d) => d.params.iter().for_each(|p| in_expr(p, input, &mut out)),
        }
        if in_terms(&s.lhs.index, input) {
            out = Some(1);
        }
    }
    out
}

impl InputArrays {
    pub fn from_tables(ast: &ProgramAst, tables: &[DataTable]) -> Result<InputArrays, CompileError> {
        let mut arrays = BTreeMap::new();
        for input in &ast.inputs {
            let Some(arity) = input_arity(ast, input) else { continue };
            let holders: Vec<&DataTable> = tables.iter().filter(|t| t.has_column(input)).collect();
            let table = match holders.as_slice() {
                [] => return Err(CompileError::MissingInput(input.clone())),
                [t] => *t,
                _ => return Err(CompileError::AmbiguousColumn(input.clone())),
            };
            let names = table.index_names();
            if names.len() != arity {
                return Err(CompileError::IndexStructureMismatch {
                    var: input.clone(),
                    expected: vec!["?".to_string(); arity],
                    found: names.to_vec(),
                });
            }
            let ranges: Vec<(i64, i64)> = names.iter().map(|n| table.index_range(n).unwrap_or((0, 0))).collect();
            let shape = VarShape {
                dims: names.iter().cloned().map(Some).collect(),
                lo: ranges.iter().map(|r| r.0).collect(),
                extent: ranges.iter().map(|r| (r.1 - r.0 + 1) as usize).collect(),
            };
            let mut values = vec![f64::NAN; shape.size()];
            let col = table.column(input).expect("holder has column");
            for (r, tuple) in table.index_rows().iter().enumerate() {
                values[shape.offset(tuple).expect("row inside its own range")] = col.values[r];
            }
            arrays.insert(input.clone(), InputArray { shape, values });
        }
        Ok(InputArrays { arrays })
    }

    /// Value of an input cell; `None` outside the table, NaN when missing.
    pub fn value(&self, input: &str, tuple: &[i64]) -> Option<f64> {
        let a = self.arrays.get(input)?;
        if a.shape.arity() != tuple.len() {
            return None;
        }
        a.shape.offset(tuple).map(|o| a.values[o])
    }

    /// Integer value of a one-level input, for lookup index terms.
    pub fn lookup(&self, input: &str, at: i64) -> Option<i64> {
        let v = self.value(input, &[at])?;
        (v.is_finite() && v.fract() == 0.0).then_some(v as i64)
    }
}

/// Assigns a status to every governed instance, in the order given.
pub fn bind(
    graph: &ModelGraph,
    concrete: &ConcreteGraph,
    order: &[usize],
    obs: &[&str],
    tables: &[DataTable],
) -> Result<Vec<SiteBinding>, CompileError> {
    // Per observed variable: its table and the table position of each var position.
    let mut sources: BTreeMap<&str, (&DataTable, Vec<usize>)> = BTreeMap::new();
    for &name in obs {
        let info = graph.var(name).ok_or_else(|| CompileError::UnknownObserved(name.to_string()))?;
        if info.nodes.iter().all(|&n| graph.nodes[n].kind == NodeKind::Deterministic) {
            return Err(CompileError::ObservedDeterministic(name.to_string()));
        }
        let holders: Vec<&DataTable> = tables.iter().filter(|t| t.has_column(name)).collect();
        let table = match holders.as_slice() {
            [] => return Err(CompileError::MissingColumn(name.to_string())),
            [t] => *t,
            _ => return Err(CompileError::AmbiguousColumn(name.to_string())),
        };
        let expected: Vec<String> =
            info.shape.dims.iter().map(|d| d.clone().unwrap_or_else(|| "?".to_string())).collect();
        let found = table.index_names().to_vec();
        let perm: Option<Vec<usize>> = expected.iter().map(|d| found.iter().position(|f| f == d)).collect();
        match perm {
            Some(p) if found.len() == expected.len() => {
                sources.insert(name, (table, p));
            }
            _ => return Err(CompileError::IndexStructureMismatch { var: name.to_string(), expected, found }),
        }
    }

    let mut out = Vec::with_capacity(order.len());
    for &k in order {
        let inst = &concrete.instances[k];
        let node = &graph.nodes[inst.node];
        let status = if node.kind == NodeKind::Deterministic {
            SiteStatus::Deterministic
        } else if let Some((table, perm)) = sources.get(node.var.as_str()) {
            let mut key = vec![0; perm.len()];
            for (pos, &p) in perm.iter().enumerate() {
                key[p] = inst.tuple[pos];
            }
            match table.get(&node.var, &key) {
                Some(v) if !v.is_nan() => SiteStatus::Observed(v),
                _ => {
                    let discrete = match &node.stmt.kind {
                        StmtKind::Sample(d) => crate::distributions::lookup(&d.name).is_some_and(|s| s.is_discrete()),
                        StmtKind::Assign(_) => false,
                    };
                    if discrete {
                        return Err(CompileError::MissingDiscreteUnsupported {
                            var: node.var.clone(),
                            tuple: inst.tuple.clone(),
                        });
                    }
                    SiteStatus::MissingImputed
                }
            }
        } else {
            SiteStatus::LatentParam
        };
        out.push(SiteBinding {
            var: node.var.clone(),
            tuple: inst.tuple.clone(),
            instance: inst.id,
            node: inst.node,
            status,
        });
    }
    Ok(out)
}

//! Symbolic dependency graph over model statements.
//!
//! Each statement becomes one node whose domain is the set of concrete index
//! tuples it governs. Nodes are never unrolled here; [`expand`] produces the
//! concrete instance graph when it is needed.

mod dot;
mod expand;
mod structure;
mod topo;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::data::DataTable;
use crate::frontend::{IndexTerm, ProgramAst, Span, Stmt, VarRef};

pub use dot::to_dot;
pub(crate) use expand::bindings;
pub use expand::{expand, resolve_terms, unroll_program, ConcreteGraph, Instance, Lookup};
pub use structure::{detect_structure, BlockClass, GroupReport, StructureReport};
pub use topo::topo_order;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("index `{0}` has no range: declare it in the Indices header or supply it as a data column")]
    MissingIndexRange(String),
    #[error("index `{index}`: header range {header:?} disagrees with data range {data:?}")]
    RangeConflict { index: String, header: (i64, i64), data: (i64, i64) },
    #[error("{var}{tuple:?} is defined by the statements at {first} and {second}")]
    OverlappingDefinitions { var: String, tuple: Vec<i64>, first: Span, second: Span },
    #[error("{var}{tuple:?} is referenced but no statement defines it")]
    UndefinedReference { var: String, tuple: Vec<i64> },
    #[error("dependency cycle among {0:?}")]
    CycleDetected(Vec<String>),
    #[error("lookup {input}[{at}] has no integer value")]
    BadLookup { input: String, at: i64 },
}

/// Inclusive range per index name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolvedIndices {
    pub ranges: BTreeMap<String, (i64, i64)>,
}

impl ResolvedIndices {
    pub fn get(&self, name: &str) -> Option<(i64, i64)> {
        self.ranges.get(name).copied()
    }
}

/// Every index name the program mentions, declared or not.
pub fn used_indices(ast: &ProgramAst) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = ast.indices.iter().map(|d| d.name.clone()).collect();
    for stmt in &ast.statements {
        let mut refs = vec![&stmt.lhs];
        refs.extend(stmt.rhs_refs());
        for r in refs {
            for t in &r.index {
                out.extend(t.index_vars().into_iter().map(str::to_string));
            }
        }
    }
    out
}

/// Range of each index: from data when some table has that index column,
/// from the header otherwise. Both present and unequal is an error.
pub fn resolve_indices(ast: &ProgramAst, tables: &[DataTable]) -> Result<ResolvedIndices, GraphError> {
    let mut ranges = BTreeMap::new();
    for name in used_indices(ast) {
        let header = ast.indices.iter().find(|d| d.name == name).map(|d| (d.lo, d.hi));
        let data = tables.iter().filter_map(|t| t.index_range(&name)).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));
        let range = match (header, data) {
            (Some(h), Some(d)) if h != d => {
                return Err(GraphError::RangeConflict { index: name, header: h, data: d });
            }
            (Some(r), _) | (None, Some(r)) => r,
            (None, None) => return Err(GraphError::MissingIndexRange(name)),
        };
        ranges.insert(name, range);
    }
    Ok(ResolvedIndices { ranges })
}

/// Dense row-major layout of a variable's instances.
#[derive(Debug, Clone, PartialEq)]
pub struct VarShape {
    /// Index name at each position, when some statement binds one there.
    pub dims: Vec<Option<String>>,
    pub lo: Vec<i64>,
    pub extent: Vec<usize>,
}

impl VarShape {
    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn size(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn offset(&self, tuple: &[i64]) -> Option<usize> {
        let mut off = 0usize;
        for ((&t, &lo), &ext) in tuple.iter().zip(&self.lo).zip(&self.extent) {
            let d = t - lo;
            if d < 0 || d as usize >= ext {
                return None;
            }
            off = off * ext + d as usize;
        }
        Some(off)
    }

    pub fn tuple(&self, mut off: usize) -> Vec<i64> {
        let mut t = vec![0; self.lo.len()];
        for k in (0..self.lo.len()).rev() {
            t[k] = self.lo[k] + (off % self.extent[k]) as i64;
            off /= self.extent[k];
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Stochastic,
    Deterministic,
}

/// Which instances a statement's left hand side names.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// Every position is an integer literal.
    Explicit(Vec<i64>),
    /// At least one position is an index variable.
    Generic(Vec<IndexTerm>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepEdge {
    pub target: String,
    pub terms: Vec<IndexTerm>,
    /// Largest lag offset in the reference; 0 means within-slice.
    pub lag: i64,
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub id: usize,
    pub var: String,
    pub kind: NodeKind,
    pub selector: Selector,
    pub stmt: Stmt,
    /// Candidate values per lhs position, after lag restriction.
    pub domain: Vec<Vec<i64>>,
    /// Tuples in `domain` governed by a more specific statement.
    pub excluded: BTreeSet<Vec<i64>>,
    pub deps: Vec<DepEdge>,
}

impl GraphNode {
    /// Index variable bound at each lhs position.
    pub fn bound_names(&self) -> Vec<Option<&str>> {
        self.stmt
            .lhs
            .index
            .iter()
            .map(|t| match t {
                IndexTerm::Var(n) => Some(n.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn is_indexed(&self) -> bool {
        !self.stmt.lhs.index.is_empty()
    }

    /// Concrete tuples this node governs, in lexicographic order.
    pub fn instances(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        for_each_tuple(&self.domain, |t| {
            if !self.excluded.contains(t) {
                out.push(t.to_vec());
            }
        });
        out
    }
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub shape: VarShape,
    /// Nodes defining this variable, in statement order.
    pub nodes: Vec<usize>,
    /// Governing node per dense offset.
    pub governor: Vec<Option<u32>>,
    /// Offset of the variable's first instance in the global instance space.
    pub base: usize,
}

impl VarInfo {
    pub fn governor_of(&self, tuple: &[i64]) -> Option<usize> {
        self.shape.offset(tuple).and_then(|o| self.governor[o]).map(|g| g as usize)
    }

    pub fn global_id(&self, tuple: &[i64]) -> Option<usize> {
        self.shape.offset(tuple).map(|o| self.base + o)
    }

    pub fn is_indexed(&self) -> bool {
        self.shape.arity() > 0
    }
}

#[derive(Debug, Clone)]
pub struct ModelGraph {
    pub name: String,
    pub indices: ResolvedIndices,
    pub inputs: Vec<String>,
    pub nodes: Vec<GraphNode>,
    pub vars: BTreeMap<String, VarInfo>,
    /// Total number of variable instances across all variables.
    pub n_instances: usize,
}

impl ModelGraph {
    pub fn var(&self, name: &str) -> Option<&VarInfo> {
        self.vars.get(name)
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.inputs.iter().any(|i| i == name)
    }

    /// Variable and tuple of a global instance id.
    pub fn instance_of(&self, id: usize) -> (&VarInfo, Vec<i64>) {
        let v = self.vars.values().filter(|v| v.base <= id).max_by_key(|v| v.base).expect("instance id in range");
        (v, v.shape.tuple(id - v.base))
    }

    /// Statements that may define the instance a reference names, ignoring lags.
    pub(crate) fn candidate_nodes(&self, r: &VarRef) -> Vec<usize> {
        let Some(info) = self.vars.get(&r.name) else { return Vec::new() };
        let literal: Option<Vec<i64>> = r
            .index
            .iter()
            .map(|t| match t {
                IndexTerm::Lit(v) => Some(*v),
                _ => None,
            })
            .collect();
        if let Some(tuple) = literal {
            return info.governor_of(&tuple).into_iter().collect();
        }
        info.nodes
            .iter()
            .copied()
            .filter(|&n| {
                r.index.iter().zip(&self.nodes[n].domain).all(|(t, dom)| match t {
                    IndexTerm::Lit(v) => dom.contains(v),
                    _ => true,
                })
            })
            .collect()
    }
}

pub(crate) fn for_each_tuple(domain: &[Vec<i64>], mut f: impl FnMut(&[i64])) {
    if domain.iter().any(|d| d.is_empty()) {
        return;
    }
    let mut pos = vec![0usize; domain.len()];
    let mut tuple: Vec<i64> = domain.iter().map(|d| d[0]).collect();
    loop {
        f(&tuple);
        let mut k = domain.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            pos[k] += 1;
            if pos[k] < domain[k].len() {
                tuple[k] = domain[k][pos[k]];
                break;
            }
            pos[k] = 0;
            tuple[k] = domain[k][0];
        }
    }
}

fn max_lag(terms: &[IndexTerm]) -> i64 {
    terms
        .iter()
        .map(|t| match t {
            IndexTerm::Lag { offset, .. } => *offset,
            IndexTerm::Lookup { inner, .. } => max_lag(std::slice::from_ref(inner)),
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

fn collect_lags(terms: &[IndexTerm], out: &mut BTreeMap<String, i64>) {
    for t in terms {
        match t {
            IndexTerm::Lag { name, offset } => {
                let e = out.entry(name.clone()).or_insert(0);
                *e = (*e).max(*offset);
            }
            IndexTerm::Lookup { inner, .. } => collect_lags(std::slice::from_ref(inner), out),
            _ => {}
        }
    }
}

/// Builds the symbolic graph. Expects a program that passed validation.
pub fn build_graph(ast: &ProgramAst, idx: &ResolvedIndices) -> Result<ModelGraph, GraphError> {
    let inputs: HashSet<&str> = ast.inputs.iter().map(String::as_str).collect();
    let range_of = |name: &str| idx.get(name).ok_or_else(|| GraphError::MissingIndexRange(name.to_string()));

    // Shapes: index name per position from generic statements, widened by literals.
    let mut dims: BTreeMap<&str, Vec<Option<String>>> = BTreeMap::new();
    let mut bounds: BTreeMap<&str, Vec<Option<(i64, i64)>>> = BTreeMap::new();
    for stmt in &ast.statements {
        let lhs = &stmt.lhs;
        let d = dims.entry(&lhs.name).or_insert_with(|| vec![None; lhs.index.len()]);
        let b = bounds.entry(&lhs.name).or_insert_with(|| vec![None; lhs.index.len()]);
        for (k, t) in lhs.index.iter().enumerate() {
            let r = match t {
                IndexTerm::Var(n) => {
                    if d[k].is_none() {
                        d[k] = Some(n.clone());
                    }
                    range_of(n)?
                }
                IndexTerm::Lit(v) => (*v, *v),
                _ => continue,
            };
            b[k] = Some(match b[k] {
                Some((lo, hi)) => (lo.min(r.0), hi.max(r.1)),
                None => r,
            });
        }
    }

    let mut nodes = Vec::with_capacity(ast.statements.len());
    for (id, stmt) in ast.statements.iter().enumerate() {
        let mut lags = BTreeMap::new();
        let mut deps: Vec<DepEdge> = Vec::new();
        for r in stmt.rhs_refs() {
            collect_lags(&r.index, &mut lags);
            if inputs.contains(r.name.as_str()) {
                continue;
            }
            let dep = DepEdge { target: r.name.clone(), terms: r.index.clone(), lag: max_lag(&r.index) };
            if !deps.contains(&dep) {
                deps.push(dep);
            }
        }
        let mut domain = Vec::with_capacity(stmt.lhs.index.len());
        for t in &stmt.lhs.index {
            domain.push(match t {
                IndexTerm::Var(n) => {
                    let (lo, hi) = range_of(n)?;
                    let lo = lo + lags.get(n).copied().unwrap_or(0);
                    (lo..=hi).collect()
                }
                IndexTerm::Lit(v) => vec![*v],
                _ => Vec::new(),
            });
        }
        let all_lit = stmt.lhs.index.iter().all(|t| matches!(t, IndexTerm::Lit(_)));
        let selector = if all_lit {
            Selector::Explicit(domain.iter().map(|d| d[0]).collect())
        } else {
            Selector::Generic(stmt.lhs.index.clone())
        };
        nodes.push(GraphNode {
            id,
            var: stmt.lhs.name.clone(),
            kind: if stmt.is_stochastic() { NodeKind::Stochastic } else { NodeKind::Deterministic },
            selector,
            stmt: stmt.clone(),
            domain,
            excluded: BTreeSet::new(),
            deps,
        });
    }

    // Governors: among statements whose domain holds a tuple, the one whose
    // literal positions strictly contain every other's wins.
    let mut vars = BTreeMap::new();
    let mut base = 0usize;
    for (name, d) in dims {
        let b = &bounds[name];
        let shape = VarShape {
            dims: d,
            lo: b.iter().map(|r| r.map_or(0, |r| r.0)).collect(),
            extent: b.iter().map(|r| r.map_or(1, |r| (r.1 - r.0 + 1) as usize)).collect(),
        };
        let defining: Vec<usize> = nodes.iter().filter(|n| n.var == name).map(|n| n.id).collect();
        let literal_sets: Vec<BTreeSet<usize>> = defining
            .iter()
            .map(|&n| {
                nodes[n]
                    .stmt
                    .lhs
                    .index
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| matches!(t, IndexTerm::Lit(_)))
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
        let mut governor = vec![None; shape.size()];
        for (off, slot) in governor.iter_mut().enumerate() {
            let tuple = shape.tuple(off);
            let cands: Vec<usize> = (0..defining.len())
                .filter(|&c| nodes[defining[c]].domain.iter().zip(&tuple).all(|(dom, v)| dom.contains(v)))
                .collect();
            let maximal: Vec<usize> = cands
                .iter()
                .copied()
                .filter(|&c| {
                    !cands.iter().any(|&o| {
                        o != c && literal_sets[o].is_superset(&literal_sets[c]) && literal_sets[o] != literal_sets[c]
                    })
                })
                .collect();
            match maximal.as_slice() {
                [] => {}
                [one] => *slot = Some(defining[*one] as u32),
                [a, b, ..] => {
                    return Err(GraphError::OverlappingDefinitions {
                        var: name.to_string(),
                        tuple,
                        first: nodes[defining[*a]].stmt.span,
                        second: nodes[defining[*b]].stmt.span,
                    });
                }
            }
        }
        for &n in &defining {
            let node = &nodes[n];
            let mut excluded = BTreeSet::new();
            for_each_tuple(&node.domain, |t| {
                let off = shape.offset(t).expect("domain inside shape");
                if governor[off] != Some(n as u32) {
                    excluded.insert(t.to_vec());
                }
            });
            nodes[n].excluded = excluded;
        }
        // Instances a generic statement nominally covers must be governed.
        for &n in &defining {
            let lhs = &nodes[n].stmt.lhs;
            if lhs.index.iter().all(|t| matches!(t, IndexTerm::Lit(_))) {
                continue;
            }
            let nominal: Vec<Vec<i64>> = lhs
                .index
                .iter()
                .map(|t| match t {
                    IndexTerm::Var(v) => {
                        let (lo, hi) = idx.get(v).expect("checked above");
                        (lo..=hi).collect()
                    }
                    IndexTerm::Lit(v) => vec![*v],
                    _ => Vec::new(),
                })
                .collect();
            let mut missing = None;
            for_each_tuple(&nominal, |t| {
                if missing.is_none() && governor[shape.offset(t).expect("inside shape")].is_none() {
                    missing = Some(t.to_vec());
                }
            });
            if let Some(tuple) = missing {
                return Err(GraphError::UndefinedReference { var: name.to_string(), tuple });
            }
        }
        let size = shape.size();
        vars.insert(name.to_string(), VarInfo { name: name.to_string(), shape, nodes: defining, governor, base });
        base += size;
    }

    let graph = ModelGraph {
        name: ast.name.clone(),
        indices: idx.clone(),
        inputs: ast.inputs.clone(),
        nodes,
        vars,
        n_instances: base,
    };

    // Fully literal references can be checked without data.
    for node in &graph.nodes {
        for dep in &node.deps {
            let lit: Option<Vec<i64>> = dep
                .terms
                .iter()
                .map(|t| match t {
                    IndexTerm::Lit(v) => Some(*v),
                    _ => None,
                })
                .collect();
            if let Some(tuple) = lit {
                let ok = graph.vars.get(&dep.target).and_then(|v| v.governor_of(&tuple)).is_some();
                if !ok {
                    return Err(GraphError::UndefinedReference { var: dep.target.clone(), tuple });
                }
            }
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn graph(src: &str) -> Result<ModelGraph, GraphError> {
        let ast = parse_program(src).unwrap();
        let idx = resolve_indices(&ast, &[])?;
        build_graph(&ast, &idx)
    }

    #[test]
    fn explicit_shadows_generic() {
        let g =
            graph("ProgramName: E4\nIndices: t 0 4\na ~ N(0,10)\ns ~ Exp(1)\nx[0] ~ N(0, s)\nx[t] ~ N(a*x[t-1], s)\n")
                .unwrap();
        assert_eq!(g.nodes[2].selector, Selector::Explicit(vec![0]));
        assert!(matches!(g.nodes[3].selector, Selector::Generic(_)));
        assert_eq!(g.nodes[3].domain, vec![vec![1, 2, 3, 4]]);
        assert_eq!(g.nodes[3].deps.iter().find(|d| d.target == "x").unwrap().lag, 1);
        let x = g.var("x").unwrap();
        assert_eq!(x.governor_of(&[0]), Some(2));
        assert_eq!(x.governor_of(&[3]), Some(3));
    }

    #[test]
    fn explicit_inside_generic_range() {
        let g = graph("ProgramName: S\nIndices: t 0 4\nx[t] ~ N(0,1)\nx[2] ~ N(5,1)\n").unwrap();
        assert!(g.nodes[0].excluded.contains(&vec![2]));
        assert_eq!(g.var("x").unwrap().governor_of(&[2]), Some(1));
    }

    #[test]
    fn missing_base_case() {
        let err = graph("ProgramName: B\nIndices: t 0 4\nx[t] ~ N(x[t-1],1)\n").unwrap_err();
        assert_eq!(err, GraphError::UndefinedReference { var: "x".into(), tuple: vec![0] });
    }

    #[test]
    fn overlapping_generic_statements() {
        let err = graph("ProgramName: O\nIndices: n 0 1, t 0 3\nx[n,t] ~ N(0,1)\nx[n,t] ~ N(1,1)\n").unwrap_err();
        assert!(matches!(err, GraphError::OverlappingDefinitions { .. }));
    }

    #[test]
    fn incomparable_literals_overlap() {
        let err = graph("ProgramName: O\nIndices: n 0 1, t 0 3\nx[n,t] ~ N(0,1)\nx[0,t] ~ N(0,1)\nx[n,0] ~ N(1,1)\n")
            .unwrap_err();
        assert!(matches!(err, GraphError::OverlappingDefinitions { ref tuple, .. } if tuple == &vec![0, 0]));
    }

    #[test]
    fn range_resolution() {
        let ast = parse_program("ProgramName: R\nIndices: t 0 4\nx[t] ~ N(0,1)\n").unwrap();
        assert_eq!(resolve_indices(&ast, &[]).unwrap().get("t"), Some((0, 4)));
        let table = DataTable::from_csv_reader("d", "t,x\n0,1\n9,2\n".as_bytes(), &["t"]).unwrap();
        let err = resolve_indices(&ast, &[table]).unwrap_err();
        assert_eq!(err, GraphError::RangeConflict { index: "t".into(), header: (0, 4), data: (0, 9) });
        let ast = parse_program("ProgramName: R\nx[t] ~ N(0,1)\n").unwrap();
        assert_eq!(resolve_indices(&ast, &[]).unwrap_err(), GraphError::MissingIndexRange("t".into()));
    }

    #[test]
    fn shape_offsets_round_trip() {
        let s = VarShape { dims: vec![None, None], lo: vec![2, -1], extent: vec![3, 4] };
        for off in 0..s.size() {
            assert_eq!(s.offset(&s.tuple(off)), Some(off));
        }
        assert_eq!(s.offset(&[5, 0]), None);
    }
}

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::{GraphError, GraphNode, ModelGraph};
use crate::frontend::{DistExpr, Expr, IndexTerm, ProgramAst, Stmt, StmtKind, VarRef};

/// Integer value of `input[at]`, used to resolve lookup index terms.
pub type Lookup<'a> = &'a dyn Fn(&str, i64) -> Option<i64>;

/// Evaluates index terms under the bindings of one node instance.
pub fn resolve_terms(
    bindings: &[(&str, i64)],
    terms: &[IndexTerm],
    lookup: Lookup<'_>,
) -> Result<Vec<i64>, GraphError> {
    terms.iter().map(|t| resolve_term(bindings, t, lookup)).collect()
}

fn resolve_term(bindings: &[(&str, i64)], term: &IndexTerm, lookup: Lookup<'_>) -> Result<i64, GraphError> {
    let bound = |n: &str| bindings.iter().find(|(b, _)| *b == n).map(|(_, v)| *v).expect("validated binding");
    match term {
        IndexTerm::Var(n) => Ok(bound(n)),
        IndexTerm::Lit(v) => Ok(*v),
        IndexTerm::Lag { name, offset } => Ok(bound(name) - offset),
        IndexTerm::Lookup { input, inner } => {
            let at = resolve_term(bindings, inner, lookup)?;
            lookup(input, at).ok_or_else(|| GraphError::BadLookup { input: input.clone(), at })
        }
    }
}

pub(crate) fn bindings<'a>(node: &'a GraphNode, tuple: &[i64]) -> Vec<(&'a str, i64)> {
    node.bound_names().into_iter().zip(tuple).filter_map(|(n, v)| n.map(|n| (n, *v))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Global instance id.
    pub id: usize,
    pub node: usize,
    pub tuple: Vec<i64>,
}

/// The fully unrolled dependency graph.
#[derive(Debug, Clone)]
pub struct ConcreteGraph {
    /// Governed instances, ascending by global id.
    pub instances: Vec<Instance>,
    /// Parents of each entry of `instances`, as global ids.
    pub parents: Vec<Vec<usize>>,
    /// Position in `instances` per global id.
    pub position: Vec<Option<usize>>,
}

pub fn expand(graph: &ModelGraph, lookup: Lookup<'_>) -> Result<ConcreteGraph, GraphError> {
    let mut instances = Vec::new();
    for info in graph.vars.values() {
        for (off, gov) in info.governor.iter().enumerate() {
            if let Some(g) = gov {
                instances.push(Instance { id: info.base + off, node: *g as usize, tuple: info.shape.tuple(off) });
            }
        }
    }
    let mut position = vec![None; graph.n_instances];
    for (k, inst) in instances.iter().enumerate() {
        position[inst.id] = Some(k);
    }
    let mut parents = Vec::with_capacity(instances.len());
    for inst in &instances {
        let node = &graph.nodes[inst.node];
        let b = bindings(node, &inst.tuple);
        let mut ps = BTreeSet::new();
        for dep in &node.deps {
            let tuple = resolve_terms(&b, &dep.terms, lookup)?;
            let info = &graph.vars[&dep.target];
            match info.global_id(&tuple) {
                Some(id) if position[id].is_some() => {
                    ps.insert(id);
                }
                _ => return Err(GraphError::UndefinedReference { var: dep.target.clone(), tuple }),
            }
        }
        parents.push(ps.into_iter().collect());
    }
    Ok(ConcreteGraph { instances, parents, position })
}

impl ConcreteGraph {
    /// Ancestral order of instance positions. Ties follow the statement
    /// order `topo`, then the global id.
    pub fn order(&self, graph: &ModelGraph, topo: &[usize]) -> Result<Vec<usize>, GraphError> {
        let mut rank = vec![0usize; graph.nodes.len()];
        for (r, &n) in topo.iter().enumerate() {
            rank[n] = r;
        }
        let n = self.instances.len();
        let mut indeg = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for (k, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                let pk = self.position[p].expect("parent governed");
                children[pk].push(k);
                indeg[k] += 1;
            }
        }
        let key = |k: usize| Reverse((rank[self.instances[k].node], self.instances[k].id, k));
        let mut heap: BinaryHeap<_> = (0..n).filter(|&k| indeg[k] == 0).map(key).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, _, k))) = heap.pop() {
            order.push(k);
            for &c in &children[k] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(key(c));
                }
            }
        }
        if order.len() < n {
            let vars: BTreeSet<String> =
                (0..n).filter(|&k| indeg[k] > 0).map(|k| graph.nodes[self.instances[k].node].var.clone()).collect();
            return Err(GraphError::CycleDetected(vars.into_iter().collect()));
        }
        Ok(order)
    }

    /// Every edge as ((child var, tuple), (parent var, tuple)).
    pub fn edge_set(&self, graph: &ModelGraph) -> BTreeSet<(Site, Site)> {
        let mut out = BTreeSet::new();
        for (inst, ps) in self.instances.iter().zip(&self.parents) {
            let child = (graph.nodes[inst.node].var.clone(), inst.tuple.clone());
            for &p in ps {
                let (info, t) = graph.instance_of(p);
                out.insert((child.clone(), (info.name.clone(), t)));
            }
        }
        out
    }
}

/// A variable name with its index tuple.
pub type Site = (String, Vec<i64>);

/// Rewrites the program with one fully literal statement per governed
/// instance. Lookups are resolved, input references keep their values.
pub fn unroll_program(graph: &ModelGraph, ast: &ProgramAst, lookup: Lookup<'_>) -> Result<ProgramAst, GraphError> {
    let mut statements = Vec::new();
    for node in &graph.nodes {
        for tuple in node.instances() {
            let b = bindings(node, &tuple);
            let lit = |r: &VarRef| -> Result<VarRef, GraphError> {
                let vals = resolve_terms(&b, &r.index, lookup)?;
                Ok(VarRef { name: r.name.clone(), index: vals.into_iter().map(IndexTerm::Lit).collect(), span: r.span })
            };
            let kind = match &node.stmt.kind {
                StmtKind::Assign(e) => StmtKind::Assign(map_refs(e, &lit)?),
                StmtKind::Sample(d) => StmtKind::Sample(DistExpr {
                    name: d.name.clone(),
                    params: d.params.iter().map(|p| map_refs(p, &lit)).collect::<Result<_, _>>()?,
                    span: d.span,
                }),
            };
            statements.push(Stmt { lhs: lit(&node.stmt.lhs)?, kind, span: node.stmt.span });
        }
    }
    Ok(ProgramAst { name: ast.name.clone(), indices: ast.indices.clone(), inputs: ast.inputs.clone(), statements })
}

fn map_refs(e: &Expr, f: &dyn Fn(&VarRef) -> Result<VarRef, GraphError>) -> Result<Expr, GraphError> {
    Ok(match e {
        Expr::Const(c) => Expr::Const(*c),
        Expr::Ref(r) => Expr::Ref(f(r)?),
        Expr::Neg(a) => Expr::Neg(Box::new(map_refs(a, f)?)),
        Expr::Binary { op, lhs, rhs } => Expr::binary(*op, map_refs(lhs, f)?, map_refs(rhs, f)?),
        Expr::Call { func, args, span } => Expr::Call {
            func: func.clone(),
            args: args.iter().map(|a| map_refs(a, f)).collect::<Result<_, _>>()?,
            span: *span,
        },
    })
}

use std::collections::BTreeSet;

use super::{GraphError, ModelGraph};
use crate::frontend::{Span, VarRef};

/// Within-slice predecessor lists: `preds[a]` holds nodes `a` reads at lag 0.
pub(crate) fn slice_preds(graph: &ModelGraph) -> Vec<Vec<usize>> {
    graph
        .nodes
        .iter()
        .map(|node| {
            let mut preds = BTreeSet::new();
            for dep in node.deps.iter().filter(|d| d.lag == 0) {
                let r = VarRef { name: dep.target.clone(), index: dep.terms.clone(), span: Span::default() };
                preds.extend(graph.candidate_nodes(&r));
            }
            preds.into_iter().collect()
        })
        .collect()
}

/// Kahn order over statements ignoring lagged edges. Ties go to unindexed
/// statements first, then to source order.
pub fn topo_order(graph: &ModelGraph) -> Result<Vec<usize>, GraphError> {
    let preds = slice_preds(graph);
    let n = graph.nodes.len();
    let mut succs = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (a, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(a);
            indeg[a] += 1;
        }
    }
    let key = |i: usize| (graph.nodes[i].is_indexed(), i);
    let mut ready: BTreeSet<(bool, usize)> = (0..n).filter(|&i| indeg[i] == 0).map(key).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(k) = ready.pop_first() {
        let i = k.1;
        order.push(i);
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(key(s));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Walk predecessors among the leftovers until a node repeats.
    let placed: BTreeSet<usize> = order.iter().copied().collect();
    let mut path = vec![(0..n).find(|i| !placed.contains(i)).expect("some node unplaced")];
    loop {
        let cur = *path.last().unwrap();
        let next = preds[cur].iter().copied().find(|p| !placed.contains(p)).expect("unplaced node has unplaced pred");
        if let Some(pos) = path.iter().position(|&p| p == next) {
            let vars: BTreeSet<String> = path[pos..].iter().map(|&i| graph.nodes[i].var.clone()).collect();
            return Err(GraphError::CycleDetected(vars.into_iter().collect()));
        }
        path.push(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::graph::{build_graph, resolve_indices};

    fn order_vars(src: &str) -> Result<Vec<String>, GraphError> {
        let ast = parse_program(src).unwrap();
        let g = build_graph(&ast, &resolve_indices(&ast, &[])?)?;
        Ok(topo_order(&g)?.into_iter().map(|i| g.nodes[i].var.clone()).collect())
    }

    #[test]
    fn scale_mixture_order() {
        assert_eq!(order_vars("ProgramName: E1\nb = 1\ns ~ Exp(b)\nx ~ N(0, 4*s)\n").unwrap(), ["b", "s", "x"]);
    }

    #[test]
    fn reversed_statements_are_reordered() {
        assert_eq!(order_vars("ProgramName: R\nx ~ N(m, 1)\nm ~ N(0, 1)\n").unwrap(), ["m", "x"]);
    }

    #[test]
    fn two_cycle() {
        let err = order_vars("ProgramName: C\nx ~ N(y,1)\ny ~ N(x,1)\n").unwrap_err();
        assert_eq!(err, GraphError::CycleDetected(vec!["x".into(), "y".into()]));
    }

    #[test]
    fn within_slice_order_respected() {
        let src = "ProgramName: W\nIndices: t 0 3\nb[t] ~ N(a[t], 1)\na[t] ~ N(0, 1)\n";
        assert_eq!(order_vars(src).unwrap(), ["a", "b"]);
    }

    #[test]
    fn lagged_edges_do_not_form_cycles() {
        let src =
            "ProgramName: L\nIndices: t 0 3\nx[0] ~ N(0,1)\ny[0] ~ N(0,1)\nx[t] ~ N(y[t-1],1)\ny[t] ~ N(x[t-1],1)\n";
        assert_eq!(order_vars(src).unwrap(), ["x", "y", "x", "y"]);
    }

    #[test]
    fn self_reference_at_literal_is_a_cycle_without_base_case() {
        let err = order_vars("ProgramName: S\nIndices: t 0 3\nx[t] ~ N(x[0],1)\n").unwrap_err();
        assert_eq!(err, GraphError::CycleDetected(vec!["x".into()]));
        let ok = order_vars("ProgramName: S\nIndices: t 0 3\nx[0] ~ N(0,1)\nx[t] ~ N(x[0],1)\n").unwrap();
        assert_eq!(ok, ["x", "x"]);
    }
}

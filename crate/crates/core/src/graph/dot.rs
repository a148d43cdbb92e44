use std::collections::BTreeSet;
use std::fmt::Write;

use super::{ModelGraph, StructureReport};
use crate::frontend::IndexTerm;

fn slice_label(var: &str, time: &str, lag: i64) -> String {
    if lag == 0 {
        format!("{var}[{time}]")
    } else {
        format!("{var}[{time}-{lag}]")
    }
}

/// DOT text of the two-slice view: one cluster per lag slice, parameters
/// outside the clusters with dashed edges.
pub fn to_dot(graph: &ModelGraph, structure: &StructureReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", graph.name);
    let _ = writeln!(out, "  rankdir=LR;");
    let mut edges = BTreeSet::new();
    let mut slices: Vec<BTreeSet<String>> = Vec::new();
    let mut params_used = BTreeSet::new();
    for group in &structure.groups {
        let time = &group.time_index;
        for &n in &group.transitions {
            let node = &graph.nodes[n];
            let child = slice_label(&node.var, time, 0);
            add_to_slice(&mut slices, 0, child.clone());
            for dep in &node.deps {
                let indexed = graph.vars.get(&dep.target).is_some_and(|v| v.is_indexed());
                if !indexed {
                    params_used.insert(dep.target.clone());
                    edges.insert((dep.target.clone(), child.clone(), true));
                    continue;
                }
                let lag = match dep.terms.last() {
                    Some(IndexTerm::Lag { offset, .. }) => *offset,
                    _ => 0,
                };
                let parent = slice_label(&dep.target, time, lag);
                add_to_slice(&mut slices, lag as usize, parent.clone());
                edges.insert((parent, child.clone(), false));
            }
        }
    }
    for (lag, members) in slices.iter().enumerate().rev() {
        if members.is_empty() {
            continue;
        }
        let label = if lag == 0 { "t".to_string() } else { format!("t-{lag}") };
        let _ = writeln!(out, "  subgraph cluster_{lag} {{");
        let _ = writeln!(out, "    label=\"{label}\";");
        for m in members {
            let _ = writeln!(out, "    \"{m}\";");
        }
        let _ = writeln!(out, "  }}");
    }
    for p in &params_used {
        let _ = writeln!(out, "  \"{p}\" [shape=box];");
    }
    for (a, b, dashed) in &edges {
        let style = if *dashed { " [style=dashed]" } else { "" };
        let _ = writeln!(out, "  \"{a}\" -> \"{b}\"{style};");
    }
    out.push_str("}\n");
    out
}

fn add_to_slice(slices: &mut Vec<BTreeSet<String>>, lag: usize, label: String) {
    if slices.len() <= lag {
        slices.resize(lag + 1, BTreeSet::new());
    }
    slices[lag].insert(label);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::graph::{build_graph, detect_structure, resolve_indices, topo_order};

    #[test]
    fn two_slice_view() {
        let ast = parse_program("ProgramName: AR\nIndices: t 0 9\na ~ N(0,1)\ny[0] ~ N(0,1)\ny[t] ~ N(a*y[t-1],1)\n")
            .unwrap();
        let g = build_graph(&ast, &resolve_indices(&ast, &[]).unwrap()).unwrap();
        let s = detect_structure(&g, &topo_order(&g).unwrap()).unwrap();
        let dot = to_dot(&g, &s);
        assert!(dot.contains("\"y[t-1]\" -> \"y[t]\";"));
        assert!(dot.contains("\"a\" -> \"y[t]\" [style=dashed];"));
        assert!(dot.starts_with("digraph \"AR\""));
    }
}

use std::collections::BTreeMap;

use rand::Rng;

use super::lower::RExpr;
use super::{CompiledModel, SiteStatus};
use crate::data::{Column, DataTable};
use crate::distributions::{self, DistError};
use crate::frontend::{Expr, StmtKind};
use crate::graph::{self, GraphNode};
use crate::Error;

fn resolve(model: &CompiledModel, node: &GraphNode, tuple: &[i64], e: &Expr) -> Result<RExpr, Error> {
    Ok(match e {
        Expr::Const(c) => RExpr::Const(*c),
        Expr::Neg(a) => RExpr::Neg(Box::new(resolve(model, node, tuple, a)?)),
        Expr::Binary { op, lhs, rhs } => {
            RExpr::Bin(*op, Box::new(resolve(model, node, tuple, lhs)?), Box::new(resolve(model, node, tuple, rhs)?))
        }
        Expr::Call { func, args, .. } => RExpr::Call(
            crate::frontend::Func::from_name(func).expect("validated function"),
            args.iter().map(|a| resolve(model, node, tuple, a)).collect::<Result<_, _>>()?,
        ),
        Expr::Ref(r) => {
            let b = graph::bindings(node, tuple);
            let at = graph::resolve_terms(&b, &r.index, &|n, i| model.inputs.lookup(n, i))?;
            if model.graph.is_input(&r.name) {
                RExpr::Const(model.inputs.value(&r.name, &at).unwrap_or(f64::NAN))
            } else {
                RExpr::Inst(model.graph.vars[&r.name].global_id(&at).expect("expanded reference") as u32)
            }
        }
    })
}

/// Ancestral sampling of every variable instance, `n_draws` times.
///
/// Returns one table per distinct index structure. Each table is indexed by
/// `draw` followed by the variables' own index names; scalars share a table
/// indexed by `draw` alone. Observed instances keep their data values.
pub fn prior_simulate<R: Rng + ?Sized>(
    model: &CompiledModel,
    rng: &mut R,
    n_draws: usize,
) -> Result<Vec<DataTable>, Error> {
    let g = &model.graph;
    // Resolve every instance once.
    let mut steps = Vec::with_capacity(model.bindings.len());
    for b in &model.bindings {
        let node = &g.nodes[b.node];
        let step = match (&node.stmt.kind, b.status) {
            (_, SiteStatus::Observed(v)) => Step::Fixed(v),
            (StmtKind::Assign(e), _) => Step::Det(resolve(model, node, &b.tuple, e)?),
            (StmtKind::Sample(d), _) => {
                let kind = distributions::lookup(&d.name).expect("validated distribution").kind;
                let params = d.params.iter().map(|p| resolve(model, node, &b.tuple, p)).collect::<Result<_, _>>()?;
                Step::Draw(kind, params)
            }
        };
        steps.push((b.instance, step));
    }

    let mut vals = vec![f64::NAN; g.n_instances];
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(n_draws);
    let mut pbuf = Vec::new();
    for _ in 0..n_draws {
        for (inst, step) in &steps {
            vals[*inst] = match step {
                Step::Fixed(v) => *v,
                Step::Det(e) => e.eval(&vals),
                Step::Draw(kind, params) => {
                    pbuf.clear();
                    pbuf.extend(params.iter().map(|p| p.eval(&vals)));
                    kind.draw(&pbuf, rng).map_err(|e: DistError| Error::Simulation(e.to_string()))?
                }
            };
        }
        draws.push(vals.clone());
    }

    // Group variables by index names.
    let mut groups: BTreeMap<Vec<String>, Vec<&str>> = BTreeMap::new();
    for (name, info) in &g.vars {
        let dims: Vec<String> = info
            .shape
            .dims
            .iter()
            .enumerate()
            .map(|(k, d)| d.clone().unwrap_or_else(|| format!("{name}_{k}")))
            .collect();
        groups.entry(dims).or_default().push(name);
    }
    let mut tables = Vec::new();
    for (dims, vars) in groups {
        let mut tuples: Vec<Vec<i64>> = Vec::new();
        for v in &vars {
            let info = &g.vars[*v];
            for (off, gov) in info.governor.iter().enumerate() {
                if gov.is_some() {
                    tuples.push(info.shape.tuple(off));
                }
            }
        }
        tuples.sort();
        tuples.dedup();
        let mut index_rows = Vec::with_capacity(n_draws * tuples.len());
        let mut columns: Vec<Column> = vars.iter().map(|v| Column::float(*v, Vec::new())).collect();
        for (d, vals) in draws.iter().enumerate() {
            for t in &tuples {
                let mut row = vec![d as i64];
                row.extend(t);
                index_rows.push(row);
                for (c, v) in columns.iter_mut().zip(&vars) {
                    let info = &g.vars[*v];
                    let x = match info.governor_of(t) {
                        Some(_) => vals[info.global_id(t).unwrap()],
                        None => f64::NAN,
                    };
                    c.values.push(x);
                }
            }
        }
        let mut names = vec!["draw".to_string()];
        names.extend(dims.iter().cloned());
        let label = if dims.is_empty() { "scalars".to_string() } else { dims.join("_") };
        tables.push(DataTable::new(label, names, index_rows, columns).map_err(|e| Error::Simulation(e.to_string()))?);
    }
    Ok(tables)
}

enum Step {
    Fixed(f64),
    Det(RExpr),
    Draw(distributions::DistKind, Vec<RExpr>),
}

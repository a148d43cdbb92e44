//! Lifting of unindexed data-bearing variables.
//!
//! A program may write `y ~ N(a + b*x, s)` with `x` and `y` as whole data
//! columns. Such names are given the index levels of their table (or a row
//! number index when the table has none), and every unindexed statement that
//! reads a lifted name is lifted with it.

use std::collections::{BTreeMap, BTreeSet};

use super::CompileError;
use crate::data::DataTable;
use crate::frontend::{DistExpr, Expr, IndexTerm, ProgramAst, StmtKind, VarRef};

/// Index name given to tables without index columns.
pub const ROW_INDEX: &str = "_row";

pub fn lift(
    ast: &ProgramAst,
    obs: &[&str],
    tables: &[DataTable],
) -> Result<(ProgramAst, Vec<DataTable>), CompileError> {
    let mut arity: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &ast.statements {
        arity.insert(&s.lhs.name, s.lhs.index.len());
        for r in s.rhs_refs() {
            arity.insert(&r.name, r.index.len());
        }
    }
    let mut tables = tables.to_vec();
    let mut lifted: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let seeds = obs.iter().copied().chain(ast.inputs.iter().map(String::as_str));
    for name in seeds {
        if arity.get(name) != Some(&0) || lifted.contains_key(name) {
            continue;
        }
        let Some(k) = tables.iter().position(|t| t.has_column(name)) else { continue };
        if tables[k].index_names().is_empty() {
            tables[k] = tables[k].with_row_index(ROW_INDEX).expect("row numbers are unique");
        }
        lifted.insert(name.to_string(), tables[k].index_names().to_vec());
    }
    if lifted.is_empty() {
        return Ok((ast.clone(), tables));
    }

    loop {
        let mut changed = false;
        for s in &ast.statements {
            let name = &s.lhs.name;
            if !s.lhs.index.is_empty() {
                continue;
            }
            let dims: BTreeSet<&Vec<String>> =
                s.rhs_refs().into_iter().filter(|r| r.index.is_empty()).filter_map(|r| lifted.get(&r.name)).collect();
            let mine = lifted.get(name);
            let mut all: BTreeSet<&Vec<String>> = dims.clone();
            all.extend(mine);
            if all.len() > 1 {
                let mut vars: Vec<String> =
                    s.rhs_refs().iter().filter(|r| lifted.contains_key(&r.name)).map(|r| r.name.clone()).collect();
                vars.push(name.clone());
                vars.sort();
                vars.dedup();
                return Err(CompileError::LiftConflict { vars });
            }
            let new = if mine.is_none() { dims.into_iter().next().cloned() } else { None };
            if let Some(d) = new {
                lifted.insert(name.clone(), d);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let lift_ref = |r: &VarRef| -> VarRef {
        match lifted.get(&r.name) {
            Some(dims) if r.index.is_empty() => VarRef {
                name: r.name.clone(),
                index: dims.iter().map(|d| IndexTerm::Var(d.clone())).collect(),
                span: r.span,
            },
            _ => r.clone(),
        }
    };
    let mut out = ast.clone();
    for s in &mut out.statements {
        s.lhs = lift_ref(&s.lhs);
        s.kind = match &s.kind {
            StmtKind::Assign(e) => StmtKind::Assign(map_expr(e, &lift_ref)),
            StmtKind::Sample(d) => StmtKind::Sample(DistExpr {
                name: d.name.clone(),
                params: d.params.iter().map(|p| map_expr(p, &lift_ref)).collect(),
                span: d.span,
            }),
        };
    }
    Ok((out, tables))
}

fn map_expr(e: &Expr, f: &dyn Fn(&VarRef) -> VarRef) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(*c),
        Expr::Ref(r) => Expr::Ref(f(r)),
        Expr::Neg(a) => Expr::Neg(Box::new(map_expr(a, f))),
        Expr::Binary { op, lhs, rhs } => Expr::binary(*op, map_expr(lhs, f), map_expr(rhs, f)),
        Expr::Call { func, args, span } => {
            Expr::Call { func: func.clone(), args: args.iter().map(|a| map_expr(a, f)).collect(), span: *span }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_program, render};

    #[test]
    fn regression_columns_get_row_index() {
        let ast = parse_program("ProgramName: LR\nInputs: x\na ~ N(0, 1)\ns ~ Exp(1)\ny ~ N(a * x, s)\n").unwrap();
        let t = DataTable::from_csv_reader("d", "x,y\n1,2\n3,4\n".as_bytes(), &[]).unwrap();
        let (lifted, tables) = lift(&ast, &["y"], &[t]).unwrap();
        let text = render(&lifted);
        assert!(text.contains("y[_row] ~ N(a * x[_row], s)"), "{text}");
        assert!(text.contains("a ~ N(0, 1)"));
        assert_eq!(tables[0].index_names(), [ROW_INDEX]);
    }

    #[test]
    fn table_index_is_reused() {
        let ast = parse_program("ProgramName: Z\nIndices: n 0 1\np ~ N(0,1)\ny ~ Poisson(exp(p))\n").unwrap();
        let t = DataTable::from_csv_reader("d", "n,y\n0,2\n1,0\n".as_bytes(), &["n"]).unwrap();
        let (lifted, _) = lift(&ast, &["y"], &[t]).unwrap();
        assert!(render(&lifted).contains("y[n] ~ Poisson(exp(p))"));
    }

    #[test]
    fn nothing_to_lift() {
        let ast = parse_program("ProgramName: A\nIndices: t 0 1\ny[t] ~ N(0,1)\n").unwrap();
        let (lifted, _) = lift(&ast, &["y"], &[]).unwrap();
        assert_eq!(lifted, ast);
    }
}

use std::fmt::Write;

use super::ast::*;

/// Canonical text for a program. Parsing the output yields an AST equal to
/// the input.
pub fn render(ast: &ProgramAst) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ProgramName: {}", ast.name);
    if !ast.indices.is_empty() {
        let decls: Vec<String> = ast.indices.iter().map(|d| format!("{} {} {}", d.name, d.lo, d.hi)).collect();
        let _ = writeln!(out, "Indices: {}", decls.join(", "));
    }
    if !ast.inputs.is_empty() {
        let _ = writeln!(out, "Inputs: {}", ast.inputs.join(", "));
    }
    for stmt in &ast.statements {
        out.push_str(&render_stmt(stmt));
        out.push('\n');
    }
    out
}

pub fn render_stmt(stmt: &Stmt) -> String {
    match &stmt.kind {
        StmtKind::Assign(e) => format!("{} = {}", render_var_ref(&stmt.lhs), render_expr(e)),
        StmtKind::Sample(d) => format!("{} ~ {}", render_var_ref(&stmt.lhs), render_dist(d)),
    }
}

pub fn render_dist(d: &DistExpr) -> String {
    let params: Vec<String> = d.params.iter().map(render_expr).collect();
    format!("{}({})", d.name, params.join(", "))
}

pub fn render_var_ref(r: &VarRef) -> String {
    if r.index.is_empty() {
        return r.name.clone();
    }
    let terms: Vec<String> = r.index.iter().map(render_index_term).collect();
    format!("{}[{}]", r.name, terms.join(","))
}

pub fn render_index_term(t: &IndexTerm) -> String {
    match t {
        IndexTerm::Var(n) => n.clone(),
        IndexTerm::Lit(v) => v.to_string(),
        IndexTerm::Lag { name, offset } => format!("{name}-{offset}"),
        IndexTerm::Lookup { input, inner } => format!("{input}[{}]", render_index_term(inner)),
    }
}

pub fn render_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

// Binding strength used for parenthesization: atoms and unary minus bind
// tighter than any binary operator.
fn strength(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        _ => 3,
    }
}

fn write_const(out: &mut String, v: f64) {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        // Negative literals only arise from programmatic ASTs.
        let _ = write!(out, "(-{})", -v);
    } else {
        let _ = write!(out, "{v}");
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Const(v) => write_const(out, *v),
        Expr::Ref(r) => out.push_str(&render_var_ref(r)),
        Expr::Neg(inner) => {
            out.push('-');
            if strength(inner) < 3 {
                out.push('(');
                write_expr(out, inner);
                out.push(')');
            } else {
                write_expr(out, inner);
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let wrap_l = strength(lhs) < p;
            // Left associative: an equal-precedence right operand needs
            // parentheses to keep its grouping.
            let wrap_r = strength(rhs) <= p;
            wrap(out, lhs, wrap_l);
            let _ = write!(out, " {} ", op.symbol());
            wrap(out, rhs, wrap_r);
        }
        Expr::Call { func, args, .. } => {
            out.push_str(func);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

fn wrap(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    #[test]
    fn nested_call_keeps_grouping() {
        let r = |n: &str| Expr::Ref(VarRef::scalar(n));
        let e = Expr::binary(
            BinOp::Mul,
            Expr::Call {
                func: "exp".into(),
                args: vec![Expr::binary(BinOp::Mul, r("a"), Expr::binary(BinOp::Add, r("b"), r("c")))],
                span: Span::default(),
            },
            Expr::binary(BinOp::Sub, r("d"), r("e")),
        );
        assert_eq!(render_expr(&e), "exp(a * (b + c)) * (d - e)");
    }

    #[test]
    fn right_nested_subtraction() {
        let src = "ProgramName: P\ny = a - (b - c)\nz = (a - b) - c\n";
        let ast = parse_program(src).unwrap();
        let text = render(&ast);
        assert!(text.contains("y = a - (b - c)"));
        assert!(text.contains("z = a - b - c"));
        assert_eq!(parse_program(&text).unwrap(), ast);
    }

    #[test]
    fn negated_sum() {
        let ast = parse_program("ProgramName: P\ny = -(a + b) * -c\n").unwrap();
        let text = render(&ast);
        assert_eq!(parse_program(&text).unwrap(), ast);
    }
}

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use super::ast::*;
use crate::distributions;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    UnknownDistribution(String),
    WrongParameterCount { dist: String, expected: usize, found: usize },
    UnknownFunction(String),
    WrongArgumentCount { func: String, expected: usize, found: usize },
    ArityMismatch { name: String, expected: usize, found: usize },
    LhsOffsetForbidden,
    LhsLookupForbidden,
    RepeatedLhsIndex(String),
    InvalidLagOffset(i64),
    NameCollision(String),
    UndefinedName(String),
    UnknownInput(String),
    UnboundIndex(String),
    DuplicateDefinition(String),
    InputAssigned(String),
    EmptyIndexRange(String),
    DuplicateIndexDecl(String),
}

/// A problem found in a parsed program, with the location it refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DiagnosticKind::*;
        write!(f, "{}: ", self.span)?;
        match &self.kind {
            UnknownDistribution(d) => write!(f, "unknown distribution `{d}`"),
            WrongParameterCount { dist, expected, found } => {
                write!(f, "`{dist}` takes {expected} parameter(s), found {found}")
            }
            UnknownFunction(n) => write!(f, "unknown function `{n}`"),
            WrongArgumentCount { func, expected, found } => {
                write!(f, "`{func}` takes {expected} argument(s), found {found}")
            }
            ArityMismatch { name, expected, found } => {
                write!(f, "`{name}` used with {found} index term(s) but elsewhere with {expected}")
            }
            LhsOffsetForbidden => f.write_str("lagged index on the left hand side"),
            LhsLookupForbidden => f.write_str("array lookup on the left hand side"),
            RepeatedLhsIndex(i) => write!(f, "index `{i}` repeated on the left hand side"),
            InvalidLagOffset(o) => write!(f, "lag offset must be at least 1, found {o}"),
            NameCollision(n) => write!(f, "`{n}` is used both as an index and as a variable or input"),
            UndefinedName(n) => write!(f, "`{n}` is never defined"),
            UnknownInput(n) => write!(f, "array lookup through `{n}`, which is not a declared input"),
            UnboundIndex(i) => write!(f, "index `{i}` on the right hand side is not bound by the left hand side"),
            DuplicateDefinition(n) => write!(f, "`{n}` is defined more than once"),
            InputAssigned(n) => write!(f, "input `{n}` cannot be defined by a statement"),
            EmptyIndexRange(n) => write!(f, "index `{n}` has an empty range"),
            DuplicateIndexDecl(n) => write!(f, "index `{n}` declared twice"),
        }
    }
}

/// Static checks on a parsed program. An empty result means the program is
/// well formed.
///
/// Index variables need not appear in the `Indices:` header; any name used in
/// an index position that is not declared there is expected to come from a
/// data table.
pub fn validate(ast: &ProgramAst) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut push = |kind: DiagnosticKind, span: Span| diags.push(Diagnostic { kind, span });

    let mut declared = BTreeSet::new();
    for d in &ast.indices {
        if !declared.insert(d.name.as_str()) {
            push(DiagnosticKind::DuplicateIndexDecl(d.name.clone()), d.span);
        }
        if d.lo > d.hi {
            push(DiagnosticKind::EmptyIndexRange(d.name.clone()), d.span);
        }
    }
    let inputs: HashSet<&str> = ast.inputs.iter().map(String::as_str).collect();
    let defined: HashSet<&str> = ast.statements.iter().map(|s| s.lhs.name.as_str()).collect();

    // Names used in index positions.
    let mut index_names: BTreeMap<&str, Span> = declared.iter().map(|n| (*n, Span::default())).collect();
    for stmt in &ast.statements {
        let mut refs = vec![&stmt.lhs];
        refs.extend(stmt.rhs_refs());
        for r in refs {
            for t in &r.index {
                for v in t.index_vars() {
                    index_names.entry(v).or_insert(r.span);
                }
            }
        }
    }
    for (name, span) in &index_names {
        if defined.contains(name) || inputs.contains(name) {
            push(DiagnosticKind::NameCollision(name.to_string()), *span);
        }
    }

    // Arity must agree across every occurrence of a name.
    let mut arity: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unindexed_defs: HashSet<&str> = HashSet::new();

    for stmt in &ast.statements {
        let lhs = &stmt.lhs;
        if inputs.contains(lhs.name.as_str()) {
            push(DiagnosticKind::InputAssigned(lhs.name.clone()), lhs.span);
        }
        if lhs.index.is_empty() && !unindexed_defs.insert(lhs.name.as_str()) {
            push(DiagnosticKind::DuplicateDefinition(lhs.name.clone()), lhs.span);
        }
        let mut bound = HashSet::new();
        for t in &lhs.index {
            match t {
                IndexTerm::Var(v) => {
                    if !bound.insert(v.as_str()) {
                        push(DiagnosticKind::RepeatedLhsIndex(v.clone()), lhs.span);
                    }
                }
                IndexTerm::Lit(_) => {}
                IndexTerm::Lag { .. } => push(DiagnosticKind::LhsOffsetForbidden, lhs.span),
                IndexTerm::Lookup { .. } => push(DiagnosticKind::LhsLookupForbidden, lhs.span),
            }
        }

        let mut refs = vec![lhs];
        refs.extend(stmt.rhs_refs());
        for (k, r) in refs.iter().enumerate() {
            match arity.get(r.name.as_str()) {
                Some(&a) if a != r.index.len() => push(
                    DiagnosticKind::ArityMismatch { name: r.name.clone(), expected: a, found: r.index.len() },
                    r.span,
                ),
                Some(_) => {}
                None => {
                    arity.insert(r.name.as_str(), r.index.len());
                }
            }
            if k == 0 {
                continue;
            }
            if !defined.contains(r.name.as_str()) && !inputs.contains(r.name.as_str()) {
                if index_names.contains_key(r.name.as_str()) && r.index.is_empty() {
                    push(DiagnosticKind::NameCollision(r.name.clone()), r.span);
                } else {
                    push(DiagnosticKind::UndefinedName(r.name.clone()), r.span);
                }
            }
            for t in &r.index {
                check_rhs_term(t, &bound, &inputs, r.span, &mut push);
            }
        }

        match &stmt.kind {
            StmtKind::Sample(d) => {
                match distributions::lookup(&d.name) {
                    None => push(DiagnosticKind::UnknownDistribution(d.name.clone()), d.span),
                    Some(spec) if spec.param_count() != d.params.len() => push(
                        DiagnosticKind::WrongParameterCount {
                            dist: d.name.clone(),
                            expected: spec.param_count(),
                            found: d.params.len(),
                        },
                        d.span,
                    ),
                    Some(_) => {}
                }
                for p in &d.params {
                    check_calls(p, &mut push);
                }
            }
            StmtKind::Assign(e) => check_calls(e, &mut push),
        }
    }
    diags
}

fn check_rhs_term(
    t: &IndexTerm,
    bound: &HashSet<&str>,
    inputs: &HashSet<&str>,
    span: Span,
    push: &mut impl FnMut(DiagnosticKind, Span),
) {
    match t {
        IndexTerm::Var(v) => {
            if !bound.contains(v.as_str()) {
                push(DiagnosticKind::UnboundIndex(v.clone()), span);
            }
        }
        IndexTerm::Lit(_) => {}
        IndexTerm::Lag { name, offset } => {
            if !bound.contains(name.as_str()) {
                push(DiagnosticKind::UnboundIndex(name.clone()), span);
            }
            if *offset < 1 {
                push(DiagnosticKind::InvalidLagOffset(*offset), span);
            }
        }
        IndexTerm::Lookup { input, inner } => {
            if !inputs.contains(input.as_str()) {
                push(DiagnosticKind::UnknownInput(input.clone()), span);
            }
            check_rhs_term(inner, bound, inputs, span, push);
        }
    }
}

fn check_calls(e: &Expr, push: &mut impl FnMut(DiagnosticKind, Span)) {
    match e {
        Expr::Const(_) | Expr::Ref(_) => {}
        Expr::Neg(inner) => check_calls(inner, push),
        Expr::Binary { lhs, rhs, .. } => {
            check_calls(lhs, push);
            check_calls(rhs, push);
        }
        Expr::Call { func, args, span } => {
            match Func::from_name(func) {
                None => push(DiagnosticKind::UnknownFunction(func.clone()), *span),
                Some(f) if f.arity() != args.len() => push(
                    DiagnosticKind::WrongArgumentCount { func: func.clone(), expected: f.arity(), found: args.len() },
                    *span,
                ),
                Some(_) => {}
            }
            for a in args {
                check_calls(a, push);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn kinds(src: &str) -> Vec<DiagnosticKind> {
        validate(&parse_program(src).unwrap()).into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn autoregressive_program_is_clean() {
        let src =
            "ProgramName: Example4\nIndices: t 0 4\na ~ N(0,10)\ns ~ Exp(1)\nx[0] ~ N(0, s)\nx[t] ~ N(a*x[t-1], s)\n";
        assert!(kinds(src).is_empty());
    }

    #[test]
    fn unknown_distribution() {
        assert_eq!(
            kinds("ProgramName: P\nx ~ Frobnicate(1)"),
            vec![DiagnosticKind::UnknownDistribution("Frobnicate".into())]
        );
    }

    #[test]
    fn lhs_offset() {
        assert_eq!(kinds("ProgramName: P\nIndices: t 0 3\nx[t-1] ~ N(0,1)"), vec![DiagnosticKind::LhsOffsetForbidden]);
    }

    #[test]
    fn arity_mismatch() {
        let k = kinds("ProgramName: P\nIndices: t 0 3\nx[t] ~ N(0,1)\ny[t] ~ N(x, 1)");
        assert!(matches!(k[0], DiagnosticKind::ArityMismatch { expected: 1, found: 0, .. }));
    }

    #[test]
    fn undefined_and_unbound() {
        let k = kinds("ProgramName: P\nIndices: t 0 3\ny ~ N(z, 1)\nw ~ N(q[t], 1)\nq[t] ~ N(0,1)");
        assert!(k.contains(&DiagnosticKind::UndefinedName("z".into())));
        assert!(k.contains(&DiagnosticKind::UnboundIndex("t".into())));
    }

    #[test]
    fn wrong_parameter_count_and_function() {
        let k = kinds("ProgramName: P\nx ~ N(0)\ny ~ N(foo(1), pow(2))");
        assert!(k.contains(&DiagnosticKind::WrongParameterCount { dist: "N".into(), expected: 2, found: 1 }));
        assert!(k.contains(&DiagnosticKind::UnknownFunction("foo".into())));
        assert!(k.contains(&DiagnosticKind::WrongArgumentCount { func: "pow".into(), expected: 2, found: 1 }));
    }

    #[test]
    fn collisions_and_duplicates() {
        let k = kinds("ProgramName: P\nIndices: t 0 3\nInputs: d\nt ~ N(0,1)\nx ~ N(0,1)\nx ~ N(1,1)\nd ~ N(0,1)");
        assert!(k.contains(&DiagnosticKind::NameCollision("t".into())));
        assert!(k.contains(&DiagnosticKind::DuplicateDefinition("x".into())));
        assert!(k.contains(&DiagnosticKind::InputAssigned("d".into())));
    }

    #[test]
    fn lookup_requires_input() {
        let k = kinds("ProgramName: P\nIndices: i 0 3\na[i] ~ N(0,1)\nb[i] ~ N(a[c[i]], 1)");
        assert!(k.contains(&DiagnosticKind::UnknownInput("c".into())));
    }

    #[test]
    fn spans_point_into_source() {
        let src = "ProgramName: P\n\nx ~ Frobnicate(1)";
        let d = &validate(&parse_program(src).unwrap())[0];
        assert_eq!((d.span.line, d.span.col), (3, 5));
    }
}

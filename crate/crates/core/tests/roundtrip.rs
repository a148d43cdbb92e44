use ldm_core::frontend::{
    parse_program, render, BinOp, DistExpr, Expr, IndexDecl, IndexTerm, ProgramAst, Span, Stmt, StmtKind, VarRef,
};
use proptest::prelude::*;

const INDICES: [&str; 3] = ["i", "j", "t"];
const INPUTS: [&str; 2] = ["g", "h"];

fn name() -> impl Strategy<Value = String> {
    "v[a-z]{0,3}[0-9]?"
}

fn index_term() -> impl Strategy<Value = IndexTerm> {
    let var = prop::sample::select(&INDICES[..]).prop_map(|s| s.to_string());
    let leaf = prop_oneof![
        var.clone().prop_map(IndexTerm::Var),
        (0i64..50).prop_map(IndexTerm::Lit),
        (var, 1i64..4).prop_map(|(name, offset)| IndexTerm::Lag { name, offset }),
    ];
    leaf.prop_recursive(2, 4, 1, |inner| {
        (prop::sample::select(&INPUTS[..]), inner)
            .prop_map(|(input, t)| IndexTerm::Lookup { input: input.to_string(), inner: Box::new(t) })
    })
}

fn var_ref() -> impl Strategy<Value = VarRef> {
    (name(), prop::collection::vec(index_term(), 0..3)).prop_map(|(name, index)| VarRef {
        name,
        index,
        span: Span::default(),
    })
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..1e6).prop_map(Expr::Const),
        (0u32..100).prop_map(|k| Expr::Const(k as f64 / 4.0)),
        var_ref().prop_map(Expr::Ref),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let op = prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]);
        let f1 = prop::sample::select(vec!["exp", "log", "expit", "logit", "sqrt", "abs"]);
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::Binary {
                op,
                lhs: Box::new(l),
                rhs: Box::new(r)
            }),
            (f1, inner.clone()).prop_map(|(f, a)| Expr::Call {
                func: f.to_string(),
                args: vec![a],
                span: Span::default()
            }),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Call {
                func: "pow".into(),
                args: vec![a, b],
                span: Span::default()
            }),
        ]
    })
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let dist =
        (prop::sample::select(vec!["N", "Exp", "Gamma", "Poisson", "StudentT"]), prop::collection::vec(expr(), 1..4))
            .prop_map(|(n, params)| DistExpr { name: n.to_string(), params, span: Span::default() });
    let kind = prop_oneof![expr().prop_map(StmtKind::Assign), dist.prop_map(StmtKind::Sample)];
    let lhs = (name(), prop::collection::vec(prop::sample::select(&INDICES[..]), 0..3)).prop_map(|(name, ix)| VarRef {
        name,
        index: ix.into_iter().map(|s| IndexTerm::Var(s.to_string())).collect(),
        span: Span::default(),
    });
    (lhs, kind).prop_map(|(lhs, kind)| Stmt { lhs, kind, span: Span::default() })
}

fn program() -> impl Strategy<Value = ProgramAst> {
    let decl = (0i64..10, 0i64..400).prop_map(|(lo, w)| (lo, lo + w));
    (
        "P[A-Za-z0-9]{0,6}",
        prop::collection::vec(decl, 0..3),
        prop::collection::vec(prop::sample::select(&INPUTS[..]), 0..2),
        prop::collection::vec(stmt(), 1..6),
    )
        .prop_map(|(name, decls, mut inputs, statements)| {
            inputs.dedup();
            let indices = decls
                .into_iter()
                .enumerate()
                .map(|(k, (lo, hi))| IndexDecl { name: INDICES[k].to_string(), lo, hi, span: Span::default() })
                .collect();
            ProgramAst { name, indices, inputs: inputs.into_iter().map(String::from).collect(), statements }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn render_then_parse_is_identity(ast in program()) {
        let text = render(&ast);
        let back = parse_program(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&back, &ast, "{}", text);
        prop_assert_eq!(render(&back), text);
    }
}

#[test]
fn corpus_sources_are_fixed_points() {
    for cm in ldm_core::corpus::all() {
        let once = render(&cm.ast());
        let twice = render(&parse_program(&once).unwrap());
        assert_eq!(once, twice, "{}", cm.name);
    }
}

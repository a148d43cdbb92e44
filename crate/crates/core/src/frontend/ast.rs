use std::fmt;

/// Source location of a syntax element, 1-based.
///
/// Spans never participate in structural equality: two ASTs that differ only
/// in where their nodes came from compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, len: u32) -> Self {
        Span { line, col, len }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Span) -> bool {
        true
    }
}

impl Eq for Span {}
impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A parsed model program.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramAst {
    pub name: String,
    pub indices: Vec<IndexDecl>,
    pub inputs: Vec<String>,
    pub statements: Vec<Stmt>,
}

/// `name lo hi` from the `Indices:` header. Bounds are inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexDecl {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub lhs: VarRef,
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// `v = expr`: deterministic node.
    Assign(Expr),
    /// `v ~ Dist(...)`: stochastic node.
    Sample(DistExpr),
}

impl Stmt {
    pub fn is_stochastic(&self) -> bool {
        matches!(self.kind, StmtKind::Sample(_))
    }

    /// Every variable reference on the right hand side, in source order.
    pub fn rhs_refs(&self) -> Vec<&VarRef> {
        let mut out = Vec::new();
        match &self.kind {
            StmtKind::Assign(e) => e.collect_refs(&mut out),
            StmtKind::Sample(d) => {
                for p in &d.params {
                    p.collect_refs(&mut out);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub index: Vec<IndexTerm>,
    pub span: Span,
}

impl VarRef {
    pub fn scalar(name: impl Into<String>) -> Self {
        VarRef { name: name.into(), index: Vec::new(), span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexTerm {
    /// `t`
    Var(String),
    /// `3`
    Lit(i64),
    /// `t-2`, meaning `t - offset`.
    Lag { name: String, offset: i64 },
    /// `tank[i]`: integer value of an input array.
    Lookup { input: String, inner: Box<IndexTerm> },
}

impl IndexTerm {
    /// Index variables mentioned by this term, including inside lookups.
    pub fn index_vars(&self) -> Vec<&str> {
        match self {
            IndexTerm::Var(n) | IndexTerm::Lag { name: n, .. } => vec![n.as_str()],
            IndexTerm::Lit(_) => vec![],
            IndexTerm::Lookup { inner, .. } => inner.index_vars(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Ref(VarRef),
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { func: String, args: Vec<Expr>, span: Span },
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn collect_refs<'a>(&'a self, out: &mut Vec<&'a VarRef>) {
        match self {
            Expr::Const(_) => {}
            Expr::Ref(r) => out.push(r),
            Expr::Neg(e) => e.collect_refs(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
            Expr::Call { args, .. } => {
                for a in args {
                    a.collect_refs(out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistExpr {
    pub name: String,
    pub params: Vec<Expr>,
    pub span: Span,
}

/// Built-in numeric functions callable from expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Expit,
    Logit,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "expit" => Func::Expit,
            "logit" => Func::Logit,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

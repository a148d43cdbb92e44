use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::FrontendError;

/// Parses model text into a [`ProgramAst`].
///
/// A program is a sequence of lines. Header lines (`ProgramName:`,
/// `Indices:`, `Inputs:`) may appear anywhere but `ProgramName:` is
/// mandatory. Every other line is an assignment or distribution statement.
pub fn parse_program(source: &str) -> Result<ProgramAst, FrontendError> {
    let tokens = tokenize(source)?;
    Parser { tokens, pos: 0 }.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const HEADERS: [&str; 3] = ["ProgramName", "Indices", "Inputs"];

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        match self.tokens.get(self.pos) {
            Some(t) => t.span,
            None => match self.tokens.last() {
                Some(t) => Span::new(t.span.line, t.span.col + t.span.len, 0),
                None => Span::new(1, 1, 0),
            },
        }
    }

    fn error(&self, expected: &str) -> FrontendError {
        let span = self.span();
        let found = match self.peek() {
            Some(k) => k.to_string(),
            None => "end of input".to_string(),
        };
        FrontendError::Syntax { line: span.line, col: span.col, expected: expected.to_string(), found }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<Span, FrontendError> {
        let span = self.span();
        if self.eat(&kind) {
            Ok(span)
        } else {
            Err(self.error(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), FrontendError> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok((name, span))
            }
            _ => Err(self.error(what)),
        }
    }

    fn integer(&mut self, what: &str) -> Result<i64, FrontendError> {
        let negative = self.eat(&TokenKind::Minus);
        match self.peek() {
            Some(TokenKind::Num(v)) if v.fract() == 0.0 && v.abs() < 9.0e15 => {
                let v = *v as i64;
                self.pos += 1;
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error(what)),
        }
    }

    fn end_of_line(&mut self) -> Result<(), FrontendError> {
        match self.peek() {
            None => Ok(()),
            Some(TokenKind::Newline) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("end of line")),
        }
    }

    fn program(&mut self) -> Result<ProgramAst, FrontendError> {
        let mut name: Option<String> = None;
        let mut indices = Vec::new();
        let mut inputs = Vec::new();
        let mut statements = Vec::new();

        while self.peek().is_some() {
            if self.eat(&TokenKind::Newline) {
                continue;
            }
            let header = match (self.peek(), self.peek_at(1)) {
                (Some(TokenKind::Ident(h)), Some(TokenKind::Colon)) if HEADERS.contains(&h.as_str()) => Some(h.clone()),
                _ => None,
            };
            match header.as_deref() {
                Some("ProgramName") => {
                    let span = self.span();
                    self.pos += 2;
                    let (n, _) = self.ident("program name")?;
                    if name.is_some() {
                        return Err(FrontendError::Syntax {
                            line: span.line,
                            col: span.col,
                            expected: "a single ProgramName header".into(),
                            found: "a second ProgramName header".into(),
                        });
                    }
                    name = Some(n);
                }
                Some("Indices") => {
                    self.pos += 2;
                    loop {
                        let (n, span) = self.ident("index name")?;
                        let lo = self.integer("integer lower bound")?;
                        let hi = self.integer("integer upper bound")?;
                        indices.push(IndexDecl { name: n, lo, hi, span });
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                }
                Some("Inputs") => {
                    self.pos += 2;
                    loop {
                        let (n, _) = self.ident("input name")?;
                        inputs.push(n);
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                }
                _ => statements.push(self.statement()?),
            }
            self.end_of_line()?;
        }

        let name = name.ok_or(FrontendError::Syntax {
            line: 1,
            col: 1,
            expected: "`ProgramName:` header".into(),
            found: "a program without one".into(),
        })?;
        Ok(ProgramAst { name, indices, inputs, statements })
    }

    fn statement(&mut self) -> Result<Stmt, FrontendError> {
        let span = self.span();
        let lhs = self.var_ref()?;
        if self.eat(&TokenKind::Assign) {
            let rhs = self.expr()?;
            Ok(Stmt { lhs, kind: StmtKind::Assign(rhs), span })
        } else if self.eat(&TokenKind::Tilde) {
            let (name, dspan) = self.ident("distribution name")?;
            self.expect(TokenKind::LParen, "`(` after distribution name")?;
            let params = self.args()?;
            Ok(Stmt { lhs, kind: StmtKind::Sample(DistExpr { name, params, span: dspan }), span })
        } else {
            Err(self.error("`=` or `~`"))
        }
    }

    /// Comma separated expressions up to and including the closing `)`.
    fn args(&mut self) -> Result<Vec<Expr>, FrontendError> {
        let mut args = Vec::new();
        if self.eat(&TokenKind::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&TokenKind::Comma) {
                continue;
            }
            self.expect(TokenKind::RParen, "`,` or `)`")?;
            return Ok(args);
        }
    }

    fn var_ref(&mut self) -> Result<VarRef, FrontendError> {
        let (name, span) = self.ident("variable name")?;
        let mut index = Vec::new();
        if self.eat(&TokenKind::LBracket) {
            loop {
                index.push(self.index_term()?);
                if self.eat(&TokenKind::Comma) {
                    continue;
                }
                self.expect(TokenKind::RBracket, "`,` or `]`")?;
                break;
            }
        }
        Ok(VarRef { name, index, span })
    }

    fn index_term(&mut self) -> Result<IndexTerm, FrontendError> {
        match self.peek() {
            Some(TokenKind::Num(_)) => Ok(IndexTerm::Lit(self.integer("integer index")?)),
            Some(TokenKind::Ident(_)) => {
                let (name, _) = self.ident("index")?;
                if self.eat(&TokenKind::Minus) {
                    let offset = self.integer("integer lag offset")?;
                    Ok(IndexTerm::Lag { name, offset })
                } else if self.eat(&TokenKind::LBracket) {
                    let inner = self.index_term()?;
                    self.expect(TokenKind::RBracket, "`]` closing array lookup")?;
                    Ok(IndexTerm::Lookup { input: name, inner: Box::new(inner) })
                } else {
                    Ok(IndexTerm::Var(name))
                }
            }
            _ => Err(self.error("index variable, integer, lag or array lookup")),
        }
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        if self.eat(&TokenKind::Minus) {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek() {
            Some(TokenKind::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            Some(TokenKind::Ident(_)) if self.peek_at(1) == Some(&TokenKind::LParen) => {
                let (func, span) = self.ident("function name")?;
                self.pos += 1;
                let args = self.args()?;
                Ok(Expr::Call { func, args, span })
            }
            Some(TokenKind::Ident(_)) => Ok(Expr::Ref(self.var_ref()?)),
            _ => Err(self.error("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_mixture_program() {
        let ast = parse_program("ProgramName: Example1\nb = 1\ns ~ Exp(b)\nx ~ N(0, 4*s)\n").unwrap();
        assert_eq!(ast.name, "Example1");
        assert_eq!(ast.statements.len(), 3);
        assert!(matches!(ast.statements[0].kind, StmtKind::Assign(Expr::Const(v)) if v == 1.0));
        match &ast.statements[2].kind {
            StmtKind::Sample(d) => {
                assert_eq!(d.name, "N");
                assert_eq!(d.params[1], Expr::binary(BinOp::Mul, Expr::Const(4.0), Expr::Ref(VarRef::scalar("s"))));
            }
            _ => panic!("expected distribution statement"),
        }
    }

    #[test]
    fn indexed_program() {
        let ast = parse_program("ProgramName: Example2\nIndices: t 0 4\nx[t] ~ N(0,1)").unwrap();
        assert_eq!(ast.indices.len(), 1);
        assert_eq!((ast.indices[0].name.as_str(), ast.indices[0].lo, ast.indices[0].hi), ("t", 0, 4));
        assert_eq!(ast.statements[0].lhs.index, vec![IndexTerm::Var("t".into())]);
    }

    #[test]
    fn empty_body() {
        let ast = parse_program("ProgramName: Empty").unwrap();
        assert!(ast.statements.is_empty());
    }

    #[test]
    fn missing_program_name() {
        let err = parse_program("x ~ N(0,1)").unwrap_err();
        assert!(matches!(err, FrontendError::Syntax { .. }));
    }

    #[test]
    fn lookup_and_lag_terms() {
        let ast = parse_program("ProgramName: P\nInputs: tank\nS[i] ~ N(a[tank[i]], y[t-2])").unwrap();
        let refs = ast.statements[0].rhs_refs();
        assert_eq!(
            refs[0].index,
            vec![IndexTerm::Lookup { input: "tank".into(), inner: Box::new(IndexTerm::Var("i".into())) }]
        );
        assert_eq!(refs[1].index, vec![IndexTerm::Lag { name: "t".into(), offset: 2 }]);
    }

    #[test]
    fn precedence() {
        let ast = parse_program("ProgramName: P\ny = a + b * -c - d").unwrap();
        let StmtKind::Assign(e) = &ast.statements[0].kind else { panic!() };
        let r = |n: &str| Expr::Ref(VarRef::scalar(n));
        let expected = Expr::binary(
            BinOp::Sub,
            Expr::binary(BinOp::Add, r("a"), Expr::binary(BinOp::Mul, r("b"), Expr::Neg(Box::new(r("c"))))),
            r("d"),
        );
        assert_eq!(*e, expected);
    }

    #[test]
    fn syntax_error_reports_position_and_hint() {
        let err = parse_program("ProgramName: P\nx ~ N(0,1\n").unwrap_err();
        match err {
            FrontendError::Syntax { line, expected, .. } => {
                assert_eq!(line, 2);
                assert!(expected.contains(')'));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn wrapped_statement() {
        let src = "ProgramName: P\nP[n,t] ~ N(w * P[n,t-1]\n    + b, s)\nA ~ N(0,1)";
        let ast = parse_program(src).unwrap();
        assert_eq!(ast.statements.len(), 2);
    }
}

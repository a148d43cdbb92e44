use std::fmt;

use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Num(f64),
    Tilde,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Newline,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "IDENT {s}"),
            TokenKind::Num(v) => write!(f, "NUM {v}"),
            TokenKind::Tilde => f.write_str("TILDE"),
            TokenKind::Assign => f.write_str("ASSIGN"),
            TokenKind::Plus => f.write_str("PLUS"),
            TokenKind::Minus => f.write_str("MINUS"),
            TokenKind::Star => f.write_str("STAR"),
            TokenKind::Slash => f.write_str("SLASH"),
            TokenKind::LParen => f.write_str("LPAREN"),
            TokenKind::RParen => f.write_str("RPAREN"),
            TokenKind::LBracket => f.write_str("LBRACK"),
            TokenKind::RBracket => f.write_str("RBRACK"),
            TokenKind::Comma => f.write_str("COMMA"),
            TokenKind::Colon => f.write_str("COLON"),
            TokenKind::Newline => f.write_str("NEWLINE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

/// Splits model text into tokens.
///
/// Newlines terminate statements, except inside parentheses or brackets where
/// they are treated as whitespace so long expressions may wrap. Comments run
/// from `#` to the end of the line. Consecutive line breaks collapse into one
/// `Newline` token and no leading `Newline` is produced.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut tokens: Vec<Token> = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    let mut depth = 0i32;

    while i < chars.len() {
        let c = chars[i];
        let start_col = col;
        match c {
            '\n' => {
                if depth == 0 {
                    if let Some(last) = tokens.last() {
                        if last.kind != TokenKind::Newline {
                            tokens.push(Token { kind: TokenKind::Newline, span: Span::new(line, col, 1) });
                        }
                    }
                }
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            _ => {}
        }

        let single = match c {
            '~' => Some(TokenKind::Tilde),
            '=' => Some(TokenKind::Assign),
            '+' => Some(TokenKind::Plus),
            '-' => Some(TokenKind::Minus),
            '*' => Some(TokenKind::Star),
            '/' => Some(TokenKind::Slash),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            '[' => Some(TokenKind::LBracket),
            ']' => Some(TokenKind::RBracket),
            ',' => Some(TokenKind::Comma),
            ':' => Some(TokenKind::Colon),
            _ => None,
        };
        if let Some(kind) = single {
            match kind {
                TokenKind::LParen | TokenKind::LBracket => depth += 1,
                TokenKind::RParen | TokenKind::RBracket => depth = (depth - 1).max(0),
                _ => {}
            }
            tokens.push(Token { kind, span: Span::new(line, start_col, 1) });
            i += 1;
            col += 1;
            continue;
        }

        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            let len = (i - begin) as u32;
            tokens.push(Token { kind: TokenKind::Ident(text), span: Span::new(line, start_col, len) });
            col += len;
            continue;
        }

        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            let len = (i - begin) as u32;
            let value: f64 =
                text.parse().map_err(|_| FrontendError::IllegalCharacter { ch: c, line, col: start_col })?;
            tokens.push(Token { kind: TokenKind::Num(value), span: Span::new(line, start_col, len) });
            col += len;
            continue;
        }

        return Err(FrontendError::IllegalCharacter { ch: c, line, col: start_col });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<String> {
        tokenize(src).unwrap().iter().map(|t| t.kind.to_string()).collect()
    }

    #[test]
    fn distribution_statement() {
        assert_eq!(kinds("x ~ N(0,1)"), ["IDENT x", "TILDE", "IDENT N", "LPAREN", "NUM 0", "COMMA", "NUM 1", "RPAREN"]);
    }

    #[test]
    fn lagged_index() {
        assert_eq!(kinds("x[t-1]"), ["IDENT x", "LBRACK", "IDENT t", "MINUS", "NUM 1", "RBRACK"]);
    }

    #[test]
    fn illegal_character_position() {
        let err = tokenize("x ~ @N(0,1)").unwrap_err();
        assert_eq!(err, FrontendError::IllegalCharacter { ch: '@', line: 1, col: 5 });
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let toks = kinds("# header comment\n\n a = 1 # trailing\n\n\nb = 2\n");
        assert_eq!(toks, ["IDENT a", "ASSIGN", "NUM 1", "NEWLINE", "IDENT b", "ASSIGN", "NUM 2", "NEWLINE"]);
    }

    #[test]
    fn newline_inside_parens_is_whitespace() {
        let toks = kinds("y ~ N(a\n  + b, s)");
        assert!(!toks.iter().any(|t| t == "NEWLINE"));
    }

    #[test]
    fn number_forms() {
        let toks = tokenize(".2 1.5e-3 7").unwrap();
        let vals: Vec<f64> = toks
            .iter()
            .map(|t| match t.kind {
                TokenKind::Num(v) => v,
                _ => panic!(),
            })
            .collect();
        assert_eq!(vals, vec![0.2, 1.5e-3, 7.0]);
    }

    #[test]
    fn spans_track_lines() {
        let toks = tokenize("a = 1\n  bb = 2").unwrap();
        let bb = toks.iter().find(|t| t.kind == TokenKind::Ident("bb".into())).unwrap();
        assert_eq!((bb.span.line, bb.span.col, bb.span.len), (2, 3, 2));
    }
}

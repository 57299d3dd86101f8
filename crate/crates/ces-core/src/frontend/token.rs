//! Hand-rolled lexer.
//!
//! `#pragma` lines are collected into a single [`TokenKind::Pragma`] token
//! carrying the rest of the line; the parser sub-lexes the clause text.

use super::ast::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    IntLit(i64),
    FloatLit(f64),
    /// The text after `#pragma`, up to end of line.
    Pragma(String),

    KwInt,
    KwFloat,
    KwDouble,
    KwVoid,
    KwIf,
    KwElse,
    KwFor,
    KwWhile,
    KwDo,
    KwBreak,

    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,

    Assign,
    PlusAssign,
    PlusPlus,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Amp,
    Pipe,
    Caret,
    Shl,
    Shr,
    Bang,

    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

pub fn lex(text: &str) -> Result<Vec<Token>, LexError> {
    lex_at(text, 0)
}

/// Lex `text`, reporting spans offset by `base` (used for pragma sub-lexing).
pub fn lex_at(text: &str, base: usize) -> Result<Vec<Token>, LexError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start = i;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(LexError {
                            message: "unterminated block comment".into(),
                            span: Span::new(base + start, base + start + 2),
                        });
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
            }
            b'#' => {
                let start = i;
                let line_end = bytes[i..]
                    .iter()
                    .position(|&b| b == b'\n')
                    .map(|p| i + p)
                    .unwrap_or(bytes.len());
                let line = &text[i..line_end];
                let rest = line
                    .strip_prefix('#')
                    .map(str::trim_start)
                    .and_then(|r| r.strip_prefix("pragma"))
                    .ok_or_else(|| LexError {
                        message: "only #pragma directives are supported".into(),
                        span: Span::new(base + start, base + line_end),
                    })?;
                tokens.push(Token {
                    kind: TokenKind::Pragma(rest.trim().to_string()),
                    span: Span::new(base + start, base + line_end),
                });
                i = line_end;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let kind = match word {
                    "int" => TokenKind::KwInt,
                    "float" => TokenKind::KwFloat,
                    "double" => TokenKind::KwDouble,
                    "void" => TokenKind::KwVoid,
                    "if" => TokenKind::KwIf,
                    "else" => TokenKind::KwElse,
                    "for" => TokenKind::KwFor,
                    "while" => TokenKind::KwWhile,
                    "do" => TokenKind::KwDo,
                    "break" => TokenKind::KwBreak,
                    _ => TokenKind::Ident(word.to_string()),
                };
                tokens.push(Token {
                    kind,
                    span: Span::new(base + start, base + i),
                });
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let mut is_float = false;
                if i < bytes.len() && bytes[i] == b'.' {
                    is_float = true;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        is_float = true;
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let t = &text[start..i];
                let span = Span::new(base + start, base + i);
                let kind = if is_float {
                    TokenKind::FloatLit(t.parse().map_err(|_| LexError {
                        message: format!("bad float literal `{t}`"),
                        span,
                    })?)
                } else {
                    TokenKind::IntLit(t.parse().map_err(|_| LexError {
                        message: format!("integer literal `{t}` out of range"),
                        span,
                    })?)
                };
                tokens.push(Token { kind, span });
            }
            _ => {
                let start = i;
                let two = if i + 1 < bytes.len() {
                    &text[i..i + 2]
                } else {
                    ""
                };
                let (kind, len) = match two {
                    "+=" => (TokenKind::PlusAssign, 2),
                    "++" => (TokenKind::PlusPlus, 2),
                    "<=" => (TokenKind::Le, 2),
                    ">=" => (TokenKind::Ge, 2),
                    "==" => (TokenKind::EqEq, 2),
                    "!=" => (TokenKind::Ne, 2),
                    "&&" => (TokenKind::AndAnd, 2),
                    "||" => (TokenKind::OrOr, 2),
                    "<<" => (TokenKind::Shl, 2),
                    ">>" => (TokenKind::Shr, 2),
                    _ => match c {
                        b'(' => (TokenKind::LParen, 1),
                        b')' => (TokenKind::RParen, 1),
                        b'{' => (TokenKind::LBrace, 1),
                        b'}' => (TokenKind::RBrace, 1),
                        b'[' => (TokenKind::LBracket, 1),
                        b']' => (TokenKind::RBracket, 1),
                        b',' => (TokenKind::Comma, 1),
                        b';' => (TokenKind::Semi, 1),
                        b'=' => (TokenKind::Assign, 1),
                        b'+' => (TokenKind::Plus, 1),
                        b'-' => (TokenKind::Minus, 1),
                        b'*' => (TokenKind::Star, 1),
                        b'/' => (TokenKind::Slash, 1),
                        b'%' => (TokenKind::Percent, 1),
                        b'<' => (TokenKind::Lt, 1),
                        b'>' => (TokenKind::Gt, 1),
                        b'&' => (TokenKind::Amp, 1),
                        b'|' => (TokenKind::Pipe, 1),
                        b'^' => (TokenKind::Caret, 1),
                        b'!' => (TokenKind::Bang, 1),
                        _ => {
                            return Err(LexError {
                                message: format!("unexpected character `{}`", c as char),
                                span: Span::new(base + start, base + start + 1),
                            })
                        }
                    },
                };
                tokens.push(Token {
                    kind,
                    span: Span::new(base + start, base + start + len),
                });
                i += len;
            }
        }
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        span: Span::new(base + bytes.len(), base + bytes.len()),
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_pragma_as_one_token() {
        let toks = lex("#pragma omp parallel\n{ }").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Pragma("omp parallel".into()));
        assert_eq!(toks[1].kind, TokenKind::LBrace);
    }

    #[test]
    fn lexes_operators_and_literals() {
        let toks = lex("x = a[i] + 3.5e2;").unwrap();
        let kinds: Vec<_> = toks.into_iter().map(|t| t.kind).collect();
        assert!(kinds.contains(&TokenKind::FloatLit(350.0)));
        assert!(kinds.contains(&TokenKind::LBracket));
    }

    #[test]
    fn rejects_stray_character() {
        assert!(lex("int @x;").is_err());
    }
}

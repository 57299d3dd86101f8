//! Recursive-descent parser and validation for the mini-OpenMP dialect.

use super::ast::*;
use super::diag::{Diagnostic, Diagnostics, SourceProgram};
use super::token::{lex, lex_at, Token, TokenKind};

/// Parse and validate a source program.
///
/// On failure returns every diagnostic collected, positioned as
/// `file:line:col`. Parsing is deterministic: identical input bytes produce
/// identical ASTs and identical diagnostics.
pub fn parse(source: &SourceProgram) -> Result<Ast, Diagnostics> {
    let mut diags = Vec::new();
    if source.text.trim().is_empty() {
        diags.push(Diagnostic::error(source, Span::new(0, 0), "empty input"));
        return Err(Diagnostics {
            path: source.path.clone(),
            items: diags,
        });
    }
    let tokens = match lex(&source.text) {
        Ok(t) => t,
        Err(e) => {
            diags.push(Diagnostic::error(source, e.span, e.message));
            return Err(Diagnostics {
                path: source.path.clone(),
                items: diags,
            });
        }
    };

    let mut p = Parser {
        tokens,
        pos: 0,
        source,
        diags,
    };
    let ast = p.parse_program();
    let mut diags = p.diags;

    if diags.is_empty() {
        diags.extend(validate(&ast, source));
    }
    if diags.is_empty() {
        Ok(ast)
    } else {
        Err(Diagnostics {
            path: source.path.clone(),
            items: diags,
        })
    }
}

struct ParseAbort;

type PResult<T> = Result<T, ParseAbort>;

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    source: &'a SourceProgram,
    diags: Vec<Diagnostic>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&mut self, span: Span, msg: impl Into<String>) -> ParseAbort {
        self.diags.push(Diagnostic::error(self.source, span, msg));
        ParseAbort
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> PResult<Token> {
        if self.peek() == &kind {
            Ok(self.bump())
        } else {
            let span = self.span();
            let found = describe(self.peek());
            Err(self.error(span, format!("expected {what}, found {found}")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                let t = self.bump();
                Ok((name, t.span))
            }
            other => {
                let span = self.span();
                let found = describe(&other);
                Err(self.error(span, format!("expected {what}, found {found}")))
            }
        }
    }

    /// Skip to the next statement boundary after an error.
    fn synchronize(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                TokenKind::Eof => return,
                TokenKind::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                TokenKind::LBrace => {
                    depth += 1;
                    self.bump();
                }
                TokenKind::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    self.bump();
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn parse_program(&mut self) -> Ast {
        let mut ast = Ast::default();
        while self.peek() != &TokenKind::Eof {
            if self.diags.len() >= 20 {
                break;
            }
            match self.parse_top_level(&mut ast) {
                Ok(()) => {}
                Err(ParseAbort) => self.synchronize(),
            }
        }
        ast
    }

    fn parse_top_level(&mut self, ast: &mut Ast) -> PResult<()> {
        match self.peek() {
            TokenKind::KwVoid => {
                let f = self.parse_function()?;
                ast.functions.push(f);
                Ok(())
            }
            TokenKind::KwInt | TokenKind::KwFloat | TokenKind::KwDouble => {
                let lo = self.span();
                let d = self.parse_decl()?;
                ast.globals.push(Sp::new(d, lo));
                Ok(())
            }
            _ => {
                let span = self.span();
                let found = describe(self.peek());
                Err(self.error(
                    span,
                    format!("expected function or global declaration, found {found}"),
                ))
            }
        }
    }

    fn parse_function(&mut self) -> PResult<FunctionDef> {
        self.expect(TokenKind::KwVoid, "`void`")?;
        let (name, _) = self.expect_ident("function name")?;
        self.expect(TokenKind::LParen, "`(`")?;
        let mut params = Vec::new();
        if self.peek() != &TokenKind::RParen {
            loop {
                let ty = self.parse_type()?;
                let (pname, _) = self.expect_ident("parameter name")?;
                let is_array = if self.eat(&TokenKind::LBracket) {
                    self.expect(TokenKind::RBracket, "`]`")?;
                    true
                } else {
                    false
                };
                params.push(Param {
                    ty,
                    name: pname,
                    is_array,
                });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen, "`)`")?;
        let body = self.parse_block()?;
        Ok(FunctionDef { name, params, body })
    }

    fn parse_type(&mut self) -> PResult<ScalarType> {
        match self.peek() {
            TokenKind::KwInt => {
                self.bump();
                Ok(ScalarType::Int)
            }
            TokenKind::KwFloat => {
                self.bump();
                Ok(ScalarType::Float)
            }
            TokenKind::KwDouble => {
                self.bump();
                Ok(ScalarType::Double)
            }
            _ => {
                let span = self.span();
                let found = describe(self.peek());
                Err(self.error(span, format!("expected type, found {found}")))
            }
        }
    }

    fn parse_block(&mut self) -> PResult<Block> {
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while self.peek() != &TokenKind::RBrace && self.peek() != &TokenKind::Eof {
            if self.diags.len() >= 20 {
                return Err(ParseAbort);
            }
            match self.parse_stmt() {
                Ok(s) => stmts.push(s),
                Err(ParseAbort) => self.synchronize(),
            }
        }
        self.expect(TokenKind::RBrace, "`}`")?;
        Ok(Block::new(stmts))
    }

    fn parse_stmt(&mut self) -> PResult<Sp<Stmt>> {
        let lo = self.span();
        let stmt = match self.peek().clone() {
            TokenKind::Pragma(text) => {
                self.bump();
                self.parse_pragma(&text, lo)?
            }
            TokenKind::KwInt | TokenKind::KwFloat | TokenKind::KwDouble => {
                Stmt::Decl(self.parse_decl()?)
            }
            TokenKind::KwIf => self.parse_if()?,
            TokenKind::KwFor => Stmt::For(self.parse_for()?),
            TokenKind::KwWhile => {
                self.bump();
                self.expect(TokenKind::LParen, "`(`")?;
                let cond = self.parse_expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                let body = self.parse_block()?;
                Stmt::While { cond, body }
            }
            TokenKind::KwDo => {
                self.bump();
                let body = self.parse_block()?;
                self.expect(TokenKind::KwWhile, "`while`")?;
                self.expect(TokenKind::LParen, "`(`")?;
                let cond = self.parse_expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                self.expect(TokenKind::Semi, "`;`")?;
                Stmt::DoWhile { body, cond }
            }
            TokenKind::KwBreak => {
                self.bump();
                self.expect(TokenKind::Semi, "`;`")?;
                Stmt::Break
            }
            TokenKind::Ident(_) => {
                let s = self.parse_simple_stmt()?;
                self.expect(TokenKind::Semi, "`;`")?;
                s
            }
            other => {
                let found = describe(&other);
                return Err(self.error(lo, format!("expected statement, found {found}")));
            }
        };
        let hi = self.prev_span();
        Ok(Sp::new(stmt, Span::new(lo.lo as usize, hi.hi as usize)))
    }

    /// Assignment or call statement, without the trailing `;`.
    fn parse_simple_stmt(&mut self) -> PResult<Stmt> {
        let (name, name_span) = self.expect_ident("statement")?;
        match self.peek().clone() {
            TokenKind::LParen => {
                self.bump();
                let args = self.parse_args()?;
                Ok(Stmt::Call { name, args })
            }
            _ => {
                let target = self.parse_lvalue_rest(name)?;
                match self.peek().clone() {
                    TokenKind::Assign => {
                        self.bump();
                        let value = self.parse_expr()?;
                        Ok(Stmt::Assign(Assign { target, value }))
                    }
                    TokenKind::PlusAssign => {
                        // `x += e` is sugar for `x = x + e`
                        self.bump();
                        let value = self.parse_expr()?;
                        Ok(Stmt::Assign(desugar_compound(target, value)))
                    }
                    TokenKind::PlusPlus => {
                        self.bump();
                        let one = Sp::new(Expr::IntLit(1), self.prev_span());
                        Ok(Stmt::Assign(desugar_compound(target, one)))
                    }
                    other => {
                        let found = describe(&other);
                        Err(self.error(
                            name_span,
                            format!(
                                "expected `=`, `+=`, `++` or `(` after identifier, found {found}"
                            ),
                        ))
                    }
                }
            }
        }
    }

    fn parse_lvalue_rest(&mut self, name: String) -> PResult<LValue> {
        if self.eat(&TokenKind::LBracket) {
            let index = self.parse_expr()?;
            self.expect(TokenKind::RBracket, "`]`")?;
            Ok(LValue::Index { array: name, index })
        } else {
            Ok(LValue::Var(name))
        }
    }

    fn parse_args(&mut self) -> PResult<Vec<Sp<Expr>>> {
        let mut args = Vec::new();
        if self.peek() != &TokenKind::RParen {
            loop {
                args.push(self.parse_expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(args)
    }

    fn parse_decl(&mut self) -> PResult<Decl> {
        let ty = self.parse_type()?;
        let (name, _) = self.expect_ident("declared name")?;
        let mut array_len = None;
        if self.eat(&TokenKind::LBracket) {
            array_len = Some(self.parse_expr()?);
            self.expect(TokenKind::RBracket, "`]`")?;
        }
        let mut init = None;
        let mut init_list = Vec::new();
        if self.eat(&TokenKind::Assign) {
            if self.peek() == &TokenKind::LBrace {
                self.bump();
                loop {
                    init_list.push(self.parse_expr()?);
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                self.expect(TokenKind::RBrace, "`}`")?;
            } else {
                init = Some(self.parse_expr()?);
            }
        }
        self.expect(TokenKind::Semi, "`;`")?;
        Ok(Decl {
            ty,
            name,
            array_len,
            init,
            init_list,
        })
    }

    fn parse_if(&mut self) -> PResult<Stmt> {
        self.expect(TokenKind::KwIf, "`if`")?;
        self.expect(TokenKind::LParen, "`(`")?;
        let cond = self.parse_expr()?;
        self.expect(TokenKind::RParen, "`)`")?;
        let then_body = self.parse_block()?;
        let else_body = if self.eat(&TokenKind::KwElse) {
            if self.peek() == &TokenKind::KwIf {
                // `else if` chains nest as a one-statement else block
                let lo = self.span();
                let nested = self.parse_if()?;
                let hi = self.prev_span();
                Some(Block::new(vec![Sp::new(
                    nested,
                    Span::new(lo.lo as usize, hi.hi as usize),
                )]))
            } else {
                Some(self.parse_block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If {
            cond,
            then_body,
            else_body,
        })
    }

    /// Canonical loop: `for (v = init; v < bound; v = v + step)`, with `v++`
    /// and `v += step` accepted as step sugar.
    fn parse_for(&mut self) -> PResult<ForLoop> {
        self.expect(TokenKind::KwFor, "`for`")?;
        let paren = self.span();
        self.expect(TokenKind::LParen, "`(`")?;
        let (var, _) = self.expect_ident("loop variable")?;
        self.expect(TokenKind::Assign, "`=`")?;
        let init = self.parse_expr()?;
        self.expect(TokenKind::Semi, "`;`")?;

        let (cvar, cvar_span) = self.expect_ident("loop variable in condition")?;
        if cvar != var {
            return Err(self.error(
                cvar_span,
                format!("non-canonical for loop: condition tests `{cvar}`, expected `{var}`"),
            ));
        }
        self.expect(TokenKind::Lt, "`<` (canonical loop condition)")?;
        let bound = self.parse_expr()?;
        self.expect(TokenKind::Semi, "`;`")?;

        let (svar, svar_span) = self.expect_ident("loop variable in step")?;
        if svar != var {
            return Err(self.error(
                svar_span,
                format!("non-canonical for loop: step updates `{svar}`, expected `{var}`"),
            ));
        }
        let step = match self.peek().clone() {
            TokenKind::PlusPlus => {
                self.bump();
                Sp::new(Expr::IntLit(1), self.prev_span())
            }
            TokenKind::PlusAssign => {
                self.bump();
                self.parse_expr()?
            }
            TokenKind::Assign => {
                self.bump();
                let (avar, avar_span) = self.expect_ident("loop variable")?;
                if avar != var {
                    return Err(self.error(
                        avar_span,
                        "non-canonical for loop: step must have the form `v = v + s`".to_string(),
                    ));
                }
                self.expect(TokenKind::Plus, "`+` (canonical loop step)")?;
                self.parse_expr()?
            }
            other => {
                let found = describe(&other);
                return Err(
                    self.error(paren, format!("non-canonical for loop step, found {found}"))
                );
            }
        };
        self.expect(TokenKind::RParen, "`)`")?;
        let body = self.parse_block()?;
        Ok(ForLoop {
            var,
            init,
            bound,
            step,
            body,
        })
    }

    fn parse_pragma(&mut self, text: &str, span: Span) -> PResult<Stmt> {
        let mut clauses = PragmaParser::new(self, text, span)?;
        if !clauses.eat_word("omp") {
            return Err(self.error(span, "expected `omp` after `#pragma`"));
        }
        if clauses.eat_word("parallel") {
            let num_threads = if clauses.eat_word("num_threads") {
                Some(clauses.parened_expr(self)?)
            } else {
                None
            };
            clauses.finish(self)?;
            let body = self.parse_block()?;
            Ok(Stmt::Parallel(ParallelRegion { num_threads, body }))
        } else if clauses.eat_word("for") {
            let mut schedule = None;
            let mut nowait = false;
            loop {
                if clauses.eat_word("schedule") {
                    schedule = Some(clauses.schedule(self)?);
                } else if clauses.eat_word("nowait") {
                    nowait = true;
                } else {
                    break;
                }
            }
            clauses.finish(self)?;
            let loop_ = self.parse_for()?;
            Ok(Stmt::OmpFor(OmpFor {
                schedule,
                nowait,
                loop_,
            }))
        } else if clauses.eat_word("sections") {
            let nowait = clauses.eat_word("nowait");
            clauses.finish(self)?;
            self.expect(TokenKind::LBrace, "`{`")?;
            let mut sections = Vec::new();
            while self.peek() != &TokenKind::RBrace && self.peek() != &TokenKind::Eof {
                match self.peek().clone() {
                    TokenKind::Pragma(p)
                        if p.split_whitespace().collect::<Vec<_>>() == ["omp", "section"] =>
                    {
                        self.bump();
                        sections.push(self.parse_block()?);
                    }
                    _ => {
                        let s = self.span();
                        return Err(self.error(s, "expected `#pragma omp section` inside sections"));
                    }
                }
            }
            self.expect(TokenKind::RBrace, "`}`")?;
            Ok(Stmt::OmpSections(OmpSections { sections, nowait }))
        } else if clauses.eat_word("single") {
            clauses.finish(self)?;
            let body = self.parse_block()?;
            Ok(Stmt::OmpSingle { body })
        } else if clauses.eat_word("barrier") {
            clauses.finish(self)?;
            Ok(Stmt::Barrier)
        } else if clauses.eat_word("atomic") {
            // `atomic write` is accepted and treated the same as `atomic`
            clauses.eat_word("write");
            clauses.finish(self)?;
            let stmt = self.parse_simple_stmt()?;
            self.expect(TokenKind::Semi, "`;`")?;
            match stmt {
                Stmt::Assign(a) => Ok(Stmt::AtomicWrite(a)),
                _ => Err(self.error(span, "#pragma omp atomic must precede an assignment")),
            }
        } else {
            Err(self.error(span, format!("unsupported pragma `#pragma {text}`")))
        }
    }

    // ---- expressions -------------------------------------------------

    fn parse_expr(&mut self) -> PResult<Sp<Expr>> {
        self.parse_assign_expr()
    }

    fn parse_assign_expr(&mut self) -> PResult<Sp<Expr>> {
        // Lookahead for `ident =` / `ident[...] =`; everything else falls
        // through to the binary expression grammar.
        if let TokenKind::Ident(name) = self.peek().clone() {
            let is_assign = match self.peek_at(1) {
                TokenKind::Assign => true,
                TokenKind::LBracket => self.find_index_assign(),
                _ => false,
            };
            if is_assign {
                let lo = self.span();
                self.bump();
                let target = self.parse_lvalue_rest(name)?;
                self.expect(TokenKind::Assign, "`=`")?;
                let value = self.parse_assign_expr()?;
                let hi = self.prev_span();
                return Ok(Sp::new(
                    Expr::Assign {
                        target: Box::new(target),
                        value: Box::new(value),
                    },
                    Span::new(lo.lo as usize, hi.hi as usize),
                ));
            }
        }
        self.parse_binary(0)
    }

    /// Whether `ident [ ... ] =` starts at the current position.
    fn find_index_assign(&self) -> bool {
        let mut depth = 0usize;
        let mut i = self.pos + 1;
        loop {
            match &self.tokens[i.min(self.tokens.len() - 1)].kind {
                TokenKind::LBracket => depth += 1,
                TokenKind::RBracket => {
                    depth -= 1;
                    if depth == 0 {
                        return matches!(
                            self.tokens[(i + 1).min(self.tokens.len() - 1)].kind,
                            TokenKind::Assign
                        );
                    }
                }
                TokenKind::Eof | TokenKind::Semi => return false,
                _ => {}
            }
            i += 1;
        }
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<Sp<Expr>> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match binop_of(self.peek()) {
                Some(op) if precedence(op) >= min_prec => op,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_binary(precedence(op) + 1)?;
            let span = Span::new(lhs.span.lo as usize, rhs.span.hi as usize);
            lhs = Sp::new(
                Expr::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> PResult<Sp<Expr>> {
        let lo = self.span();
        match self.peek() {
            TokenKind::Minus => {
                self.bump();
                let operand = self.parse_unary()?;
                let span = Span::new(lo.lo as usize, operand.span.hi as usize);
                Ok(Sp::new(
                    Expr::Unary {
                        op: UnOp::Neg,
                        operand: Box::new(operand),
                    },
                    span,
                ))
            }
            TokenKind::Bang => {
                self.bump();
                let operand = self.parse_unary()?;
                let span = Span::new(lo.lo as usize, operand.span.hi as usize);
                Ok(Sp::new(
                    Expr::Unary {
                        op: UnOp::Not,
                        operand: Box::new(operand),
                    },
                    span,
                ))
            }
            _ => self.parse_postfix(),
        }
    }

    fn parse_postfix(&mut self) -> PResult<Sp<Expr>> {
        let lo = self.span();
        match self.peek().clone() {
            TokenKind::IntLit(v) => {
                self.bump();
                Ok(Sp::new(Expr::IntLit(v), lo))
            }
            TokenKind::FloatLit(v) => {
                self.bump();
                Ok(Sp::new(Expr::FloatLit(v), lo))
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.bump();
                match self.peek() {
                    TokenKind::LParen => {
                        self.bump();
                        let args = self.parse_args()?;
                        let hi = self.prev_span();
                        Ok(Sp::new(
                            Expr::Call { name, args },
                            Span::new(lo.lo as usize, hi.hi as usize),
                        ))
                    }
                    TokenKind::LBracket => {
                        self.bump();
                        let index = self.parse_expr()?;
                        self.expect(TokenKind::RBracket, "`]`")?;
                        let hi = self.prev_span();
                        Ok(Sp::new(
                            Expr::Index {
                                array: name,
                                index: Box::new(index),
                            },
                            Span::new(lo.lo as usize, hi.hi as usize),
                        ))
                    }
                    _ => Ok(Sp::new(Expr::Var(name), lo)),
                }
            }
            other => {
                let found = describe(&other);
                Err(self.error(lo, format!("expected expression, found {found}")))
            }
        }
    }
}

fn desugar_compound(target: LValue, rhs: Sp<Expr>) -> Assign {
    let read = match &target {
        LValue::Var(n) => Expr::Var(n.clone()),
        LValue::Index { array, index } => Expr::Index {
            array: array.clone(),
            index: Box::new(index.clone()),
        },
    };
    let span = rhs.span;
    Assign {
        target,
        value: Sp::new(
            Expr::Binary {
                op: BinOp::Add,
                lhs: Box::new(Sp::new(read, span)),
                rhs: Box::new(rhs),
            },
            span,
        ),
    }
}

fn binop_of(t: &TokenKind) -> Option<BinOp> {
    Some(match t {
        TokenKind::OrOr => BinOp::Or,
        TokenKind::AndAnd => BinOp::And,
        TokenKind::Pipe => BinOp::BitOr,
        TokenKind::Caret => BinOp::BitXor,
        TokenKind::Amp => BinOp::BitAnd,
        TokenKind::EqEq => BinOp::Eq,
        TokenKind::Ne => BinOp::Ne,
        TokenKind::Lt => BinOp::Lt,
        TokenKind::Le => BinOp::Le,
        TokenKind::Gt => BinOp::Gt,
        TokenKind::Ge => BinOp::Ge,
        TokenKind::Shl => BinOp::Shl,
        TokenKind::Shr => BinOp::Shr,
        TokenKind::Plus => BinOp::Add,
        TokenKind::Minus => BinOp::Sub,
        TokenKind::Star => BinOp::Mul,
        TokenKind::Slash => BinOp::Div,
        TokenKind::Percent => BinOp::Mod,
        _ => return None,
    })
}

pub(crate) fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::BitOr => 3,
        BinOp::BitXor => 4,
        BinOp::BitAnd => 5,
        BinOp::Eq | BinOp::Ne => 6,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 7,
        BinOp::Shl | BinOp::Shr => 8,
        BinOp::Add | BinOp::Sub => 9,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 10,
    }
}

/// Clause mini-parser over the sub-lexed pragma tail.
struct PragmaParser {
    tokens: Vec<Token>,
    pos: usize,
    span: Span,
}

impl PragmaParser {
    fn new(p: &mut Parser<'_>, text: &str, span: Span) -> PResult<Self> {
        let tokens = lex_at(text, span.lo as usize)
            .map_err(|e| p.error(span, format!("in pragma: {}", e.message)))?;
        Ok(PragmaParser {
            tokens,
            pos: 0,
            span,
        })
    }

    fn eat_word(&mut self, word: &str) -> bool {
        match &self.tokens[self.pos].kind {
            TokenKind::Ident(w) if w == word => {
                self.pos += 1;
                true
            }
            TokenKind::KwFor if word == "for" => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn parened_expr(&mut self, p: &mut Parser<'_>) -> PResult<Sp<Expr>> {
        let mut sub = Parser {
            tokens: self.tokens[self.pos..].to_vec(),
            pos: 0,
            source: p.source,
            diags: Vec::new(),
        };
        sub.expect(TokenKind::LParen, "`(`")
            .map_err(|e| self.reemit(p, sub_take(&mut sub), e))?;
        let e = sub
            .parse_expr()
            .map_err(|e| self.reemit(p, sub_take(&mut sub), e))?;
        sub.expect(TokenKind::RParen, "`)`")
            .map_err(|er| self.reemit(p, sub_take(&mut sub), er))?;
        self.pos += sub.pos;
        Ok(e)
    }

    fn schedule(&mut self, p: &mut Parser<'_>) -> PResult<Schedule> {
        let mut sub = Parser {
            tokens: self.tokens[self.pos..].to_vec(),
            pos: 0,
            source: p.source,
            diags: Vec::new(),
        };
        let result = (|| -> PResult<Schedule> {
            sub.expect(TokenKind::LParen, "`(`")?;
            let kind = match sub.peek().clone() {
                TokenKind::Ident(w) if w == "dynamic" => {
                    sub.bump();
                    ScheduleKind::Dynamic
                }
                TokenKind::Ident(w) if w == "guided" => {
                    sub.bump();
                    ScheduleKind::Guided
                }
                TokenKind::Ident(w) if w == "static" => {
                    sub.bump();
                    ScheduleKind::Static
                }
                other => {
                    let found = describe(&other);
                    let span = sub.span();
                    return Err(sub.error(span, format!("expected schedule kind, found {found}")));
                }
            };
            let chunk = if sub.eat(&TokenKind::Comma) {
                Some(sub.parse_expr()?)
            } else {
                None
            };
            sub.expect(TokenKind::RParen, "`)`")?;
            Ok(Schedule { kind, chunk })
        })();
        match result {
            Ok(s) => {
                self.pos += sub.pos;
                Ok(s)
            }
            Err(e) => Err(self.reemit(p, sub_take(&mut sub), e)),
        }
    }

    fn finish(&mut self, p: &mut Parser<'_>) -> PResult<()> {
        match &self.tokens[self.pos].kind {
            TokenKind::Eof => Ok(()),
            other => {
                let found = describe(other);
                Err(p.error(self.span, format!("unexpected pragma clause: {found}")))
            }
        }
    }

    fn reemit(&self, p: &mut Parser<'_>, diags: Vec<Diagnostic>, e: ParseAbort) -> ParseAbort {
        p.diags.extend(diags);
        e
    }
}

fn sub_take(sub: &mut Parser<'_>) -> Vec<Diagnostic> {
    std::mem::take(&mut sub.diags)
}

fn describe(t: &TokenKind) -> String {
    match t {
        TokenKind::Ident(n) => format!("`{n}`"),
        TokenKind::IntLit(v) => format!("`{v}`"),
        TokenKind::FloatLit(v) => format!("`{v}`"),
        TokenKind::Pragma(p) => format!("`#pragma {p}`"),
        TokenKind::Eof => "end of input".to_string(),
        TokenKind::KwInt => "`int`".into(),
        TokenKind::KwFloat => "`float`".into(),
        TokenKind::KwDouble => "`double`".into(),
        TokenKind::KwVoid => "`void`".into(),
        TokenKind::KwIf => "`if`".into(),
        TokenKind::KwElse => "`else`".into(),
        TokenKind::KwFor => "`for`".into(),
        TokenKind::KwWhile => "`while`".into(),
        TokenKind::KwDo => "`do`".into(),
        TokenKind::KwBreak => "`break`".into(),
        TokenKind::LParen => "`(`".into(),
        TokenKind::RParen => "`)`".into(),
        TokenKind::LBrace => "`{`".into(),
        TokenKind::RBrace => "`}`".into(),
        TokenKind::LBracket => "`[`".into(),
        TokenKind::RBracket => "`]`".into(),
        TokenKind::Comma => "`,`".into(),
        TokenKind::Semi => "`;`".into(),
        TokenKind::Assign => "`=`".into(),
        TokenKind::PlusAssign => "`+=`".into(),
        TokenKind::PlusPlus => "`++`".into(),
        TokenKind::Plus => "`+`".into(),
        TokenKind::Minus => "`-`".into(),
        TokenKind::Star => "`*`".into(),
        TokenKind::Slash => "`/`".into(),
        TokenKind::Percent => "`%`".into(),
        TokenKind::Lt => "`<`".into(),
        TokenKind::Le => "`<=`".into(),
        TokenKind::Gt => "`>`".into(),
        TokenKind::Ge => "`>=`".into(),
        TokenKind::EqEq => "`==`".into(),
        TokenKind::Ne => "`!=`".into(),
        TokenKind::AndAnd => "`&&`".into(),
        TokenKind::OrOr => "`||`".into(),
        TokenKind::Amp => "`&`".into(),
        TokenKind::Pipe => "`|`".into(),
        TokenKind::Caret => "`^`".into(),
        TokenKind::Shl => "`<<`".into(),
        TokenKind::Shr => "`>>`".into(),
        TokenKind::Bang => "`!`".into(),
    }
}

// ---- validation -------------------------------------------------------

/// Structural checks beyond the grammar: parallel-region nesting, placement
/// of work-sharing constructs and barriers, and the canonical-loop
/// restriction for `omp for`.
pub fn validate(ast: &Ast, source: &SourceProgram) -> Vec<Diagnostic> {
    let mut v = Validator {
        source,
        diags: Vec::new(),
    };
    for f in &ast.functions {
        v.block(&f.body, Ctx::Outside);
    }
    v.diags
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    /// Not inside any parallel region.
    Outside,
    /// Immediate child list of a parallel region body.
    RegionBody,
    /// Inside a parallel region, but nested below the region body.
    InsideNested,
}

struct Validator<'a> {
    source: &'a SourceProgram,
    diags: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(self.source, span, msg));
    }

    fn block(&mut self, b: &Block, ctx: Ctx) {
        for s in &b.stmts {
            self.stmt(s, ctx);
        }
    }

    fn stmt(&mut self, s: &Sp<Stmt>, ctx: Ctx) {
        let inside = |ctx| match ctx {
            Ctx::Outside => Ctx::Outside,
            _ => Ctx::InsideNested,
        };
        match &s.node {
            Stmt::Parallel(region) => {
                if ctx != Ctx::Outside {
                    self.error(s.span, "nested parallel region");
                    return;
                }
                self.block(&region.body, Ctx::RegionBody);
            }
            Stmt::OmpFor(of) => {
                if ctx != Ctx::RegionBody {
                    self.error(
                        s.span,
                        "work-sharing construct must be an immediate child of a parallel region",
                    );
                }
                self.check_canonical(&of.loop_, s.span);
                self.block(&of.loop_.body, inside(ctx));
            }
            Stmt::OmpSections(secs) => {
                if ctx != Ctx::RegionBody {
                    self.error(
                        s.span,
                        "work-sharing construct must be an immediate child of a parallel region",
                    );
                }
                if secs.sections.is_empty() {
                    self.error(s.span, "sections construct requires at least one section");
                }
                for sec in &secs.sections {
                    self.block(sec, inside(ctx));
                }
            }
            Stmt::OmpSingle { body } => {
                if ctx != Ctx::RegionBody {
                    self.error(
                        s.span,
                        "work-sharing construct must be an immediate child of a parallel region",
                    );
                }
                self.block(body, inside(ctx));
            }
            Stmt::Barrier => {
                if ctx != Ctx::RegionBody {
                    self.error(
                        s.span,
                        "barrier must be an immediate child of a parallel region",
                    );
                }
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                self.block(then_body, inside(ctx));
                if let Some(e) = else_body {
                    self.block(e, inside(ctx));
                }
            }
            Stmt::For(f) => self.block(&f.body, inside(ctx)),
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } => {
                self.block(body, inside(ctx));
            }
            Stmt::Decl(_)
            | Stmt::Assign(_)
            | Stmt::Call { .. }
            | Stmt::Break
            | Stmt::AtomicWrite(_) => {}
        }
    }

    /// `for (i = L; i < U; i += S)` under `omp for` needs loop-invariant
    /// L, U and a positive constant step so N_ITRS has a closed form.
    fn check_canonical(&mut self, lp: &ForLoop, span: Span) {
        let assigned = assigned_names(&lp.body);
        for (what, e) in [
            ("initial value", &lp.init),
            ("bound", &lp.bound),
            ("step", &lp.step),
        ] {
            let mut bad = None;
            check_invariant(e, &lp.var, &assigned, &mut bad);
            if let Some(reason) = bad {
                self.error(
                    span,
                    format!("non-canonical omp for loop: {what} is not loop-invariant ({reason})"),
                );
            }
        }
        match crate::workload::fold::fold_int(&lp.step.node) {
            Some(v) if v > 0 => {}
            Some(_) => self.error(span, "non-canonical omp for loop: step must be positive"),
            None => self.error(
                span,
                "non-canonical omp for loop: step must be a positive constant",
            ),
        }
    }
}

/// Names assigned anywhere in a block (assignments, declarations, loop vars).
pub(crate) fn assigned_names(b: &Block) -> std::collections::BTreeSet<String> {
    let mut out = std::collections::BTreeSet::new();
    collect_assigned(b, &mut out);
    out
}

fn collect_assigned(b: &Block, out: &mut std::collections::BTreeSet<String>) {
    for s in &b.stmts {
        match &s.node {
            Stmt::Decl(d) => {
                out.insert(d.name.clone());
            }
            Stmt::Assign(a) | Stmt::AtomicWrite(a) => {
                out.insert(a.target.name().to_string());
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_assigned(then_body, out);
                if let Some(e) = else_body {
                    collect_assigned(e, out);
                }
            }
            Stmt::For(f) => {
                out.insert(f.var.clone());
                collect_assigned(&f.body, out);
            }
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } => collect_assigned(body, out),
            Stmt::OmpFor(of) => {
                out.insert(of.loop_.var.clone());
                collect_assigned(&of.loop_.body, out);
            }
            Stmt::OmpSections(ss) => {
                for sec in &ss.sections {
                    collect_assigned(sec, out);
                }
            }
            Stmt::OmpSingle { body } => collect_assigned(body, out),
            Stmt::Parallel(r) => collect_assigned(&r.body, out),
            Stmt::Call { .. } | Stmt::Break | Stmt::Barrier => {}
        }
    }
}

fn check_invariant(
    e: &Sp<Expr>,
    loop_var: &str,
    assigned: &std::collections::BTreeSet<String>,
    bad: &mut Option<String>,
) {
    if bad.is_some() {
        return;
    }
    match &e.node {
        Expr::Var(n) => {
            if n == loop_var {
                *bad = Some(format!("references loop variable `{n}`"));
            } else if assigned.contains(n) {
                *bad = Some(format!("references `{n}`, which the loop body assigns"));
            }
        }
        Expr::Index { array, index } => {
            if assigned.contains(array) {
                *bad = Some(format!("references `{array}`, which the loop body assigns"));
            }
            check_invariant(index, loop_var, assigned, bad);
        }
        Expr::Call { .. } => *bad = Some("contains a call".to_string()),
        Expr::Assign { .. } => *bad = Some("contains an assignment".to_string()),
        Expr::Unary { operand, .. } => check_invariant(operand, loop_var, assigned, bad),
        Expr::Binary { lhs, rhs, .. } => {
            check_invariant(lhs, loop_var, assigned, bad);
            check_invariant(rhs, loop_var, assigned, bad);
        }
        Expr::IntLit(_) | Expr::FloatLit(_) => {}
    }
}

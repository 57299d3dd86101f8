//! Pretty-printer. `parse(emit_source(ast))` is structurally the identity,
//! and the output is byte-stable across runs.

use std::fmt::Write;

use super::ast::*;
use super::parser::precedence;

pub fn emit_source(ast: &Ast) -> String {
    let mut p = Printer {
        out: String::new(),
        indent: 0,
    };
    for g in &ast.globals {
        p.decl(&g.node);
    }
    if !ast.globals.is_empty() && !ast.functions.is_empty() {
        p.out.push('\n');
    }
    for (i, f) in ast.functions.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.function(f);
    }
    p.out
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn function(&mut self, f: &FunctionDef) {
        let params = f
            .params
            .iter()
            .map(|p| {
                if p.is_array {
                    format!("{} {}[]", p.ty, p.name)
                } else {
                    format!("{} {}", p.ty, p.name)
                }
            })
            .collect::<Vec<_>>()
            .join(", ");
        self.line(&format!("void {}({}) {{", f.name, params));
        self.indent += 1;
        self.block_inner(&f.body);
        self.indent -= 1;
        self.line("}");
    }

    fn block_inner(&mut self, b: &Block) {
        for s in &b.stmts {
            self.stmt(&s.node);
        }
    }

    fn open_block(&mut self, head: &str) {
        if head.is_empty() {
            self.line("{");
        } else {
            self.line(&format!("{head} {{"));
        }
        self.indent += 1;
    }

    fn close_block(&mut self) {
        self.indent -= 1;
        self.line("}");
    }

    fn decl(&mut self, d: &Decl) {
        let mut s = format!("{} {}", d.ty, d.name);
        if let Some(len) = &d.array_len {
            write!(s, "[{}]", expr(&len.node)).unwrap();
        }
        if let Some(init) = &d.init {
            write!(s, " = {}", expr(&init.node)).unwrap();
        }
        if !d.init_list.is_empty() {
            let items = d
                .init_list
                .iter()
                .map(|e| expr(&e.node))
                .collect::<Vec<_>>()
                .join(", ");
            write!(s, " = {{{items}}}").unwrap();
        }
        s.push(';');
        self.line(&s);
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Decl(d) => self.decl(d),
            Stmt::Assign(a) => self.line(&format!("{};", assign(a))),
            Stmt::AtomicWrite(a) => {
                self.line("#pragma omp atomic");
                self.line(&format!("{};", assign(a)));
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                self.open_block(&format!("if ({})", expr(&cond.node)));
                self.block_inner(then_body);
                self.close_block();
                if let Some(e) = else_body {
                    self.else_branch(e);
                }
            }
            Stmt::For(f) => {
                self.open_block(&for_head(f));
                self.block_inner(&f.body);
                self.close_block();
            }
            Stmt::While { cond, body } => {
                self.open_block(&format!("while ({})", expr(&cond.node)));
                self.block_inner(body);
                self.close_block();
            }
            Stmt::DoWhile { body, cond } => {
                self.open_block("do");
                self.block_inner(body);
                self.indent -= 1;
                self.line(&format!("}} while ({});", expr(&cond.node)));
            }
            Stmt::Call { name, args } => {
                let args = args
                    .iter()
                    .map(|a| expr(&a.node))
                    .collect::<Vec<_>>()
                    .join(", ");
                self.line(&format!("{name}({args});"));
            }
            Stmt::Break => self.line("break;"),
            Stmt::Barrier => self.line("#pragma omp barrier"),
            Stmt::Parallel(r) => {
                let head = match &r.num_threads {
                    Some(e) => format!("#pragma omp parallel num_threads({})", expr(&e.node)),
                    None => "#pragma omp parallel".to_string(),
                };
                self.line(&head);
                self.open_block("");
                self.block_inner(&r.body);
                self.close_block();
            }
            Stmt::OmpFor(of) => {
                let mut head = "#pragma omp for".to_string();
                if let Some(sch) = &of.schedule {
                    match &sch.chunk {
                        Some(c) => {
                            write!(head, " schedule({}, {})", sch.kind, expr(&c.node)).unwrap()
                        }
                        None => write!(head, " schedule({})", sch.kind).unwrap(),
                    }
                }
                if of.nowait {
                    head.push_str(" nowait");
                }
                self.line(&head);
                self.open_block(&for_head(&of.loop_));
                self.block_inner(&of.loop_.body);
                self.close_block();
            }
            Stmt::OmpSections(ss) => {
                let head = if ss.nowait {
                    "#pragma omp sections nowait"
                } else {
                    "#pragma omp sections"
                };
                self.line(head);
                self.open_block("");
                for sec in &ss.sections {
                    self.line("#pragma omp section");
                    self.open_block("");
                    self.block_inner(sec);
                    self.close_block();
                }
                self.close_block();
            }
            Stmt::OmpSingle { body } => {
                self.line("#pragma omp single");
                self.open_block("");
                self.block_inner(body);
                self.close_block();
            }
        }
    }

    fn else_branch(&mut self, e: &Block) {
        // Re-sugar `else { if ... }` chains into `else if`.
        if e.stmts.len() == 1 {
            if let Stmt::If {
                cond,
                then_body,
                else_body,
            } = &e.stmts[0].node
            {
                self.open_block(&format!("else if ({})", expr(&cond.node)));
                self.block_inner(then_body);
                self.close_block();
                if let Some(inner) = else_body {
                    self.else_branch(inner);
                }
                return;
            }
        }
        self.open_block("else");
        self.block_inner(e);
        self.close_block();
    }
}

fn for_head(f: &ForLoop) -> String {
    let step = if f.step.node == Expr::IntLit(1) {
        format!("{}++", f.var)
    } else {
        format!("{} = {} + {}", f.var, f.var, expr_prec(&f.step.node, 10))
    };
    format!(
        "for ({} = {}; {} < {}; {})",
        f.var,
        expr(&f.init.node),
        f.var,
        expr(&f.bound.node),
        step
    )
}

fn assign(a: &Assign) -> String {
    format!("{} = {}", lvalue(&a.target), expr(&a.value.node))
}

fn lvalue(l: &LValue) -> String {
    match l {
        LValue::Var(n) => n.clone(),
        LValue::Index { array, index } => format!("{}[{}]", array, expr(&index.node)),
    }
}

pub(crate) fn expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

/// Print with parentheses only where the parent's precedence requires them.
fn expr_prec(e: &Expr, parent_prec: u8) -> String {
    match e {
        Expr::IntLit(v) => v.to_string(),
        Expr::FloatLit(v) => fmt_f64(*v),
        Expr::Var(n) => n.clone(),
        Expr::Index { array, index } => format!("{}[{}]", array, expr(&index.node)),
        Expr::Unary { op, operand } => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            format!("{}{}", sym, expr_prec(&operand.node, 11))
        }
        Expr::Binary { op, lhs, rhs } => {
            let prec = precedence(*op);
            let s = format!(
                "{} {} {}",
                expr_prec(&lhs.node, prec),
                op.symbol(),
                expr_prec(&rhs.node, prec + 1)
            );
            if prec < parent_prec {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Call { name, args } => {
            let args = args
                .iter()
                .map(|a| expr(&a.node))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{name}({args})")
        }
        Expr::Assign { target, value } => {
            format!("({} = {})", lvalue(target), expr(&value.node))
        }
    }
}

/// Round-trip-stable float formatting; integral values keep a `.0` suffix so
/// they re-lex as floats.
fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

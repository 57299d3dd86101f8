//! Pre-analysis inlining.
//!
//! Statement-position calls to defined, non-recursive functions are expanded
//! in place before any counting runs. Scalar arguments bind through fresh
//! temporaries so their cost is counted once; array parameters substitute by
//! name. Calls that cannot be inlined (recursive, undefined, or in
//! expression position) stay put and are treated as unknown-cost by the
//! workload model.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;

pub fn inline_functions(ast: &Ast) -> Ast {
    let recursive = recursive_functions(ast);
    let mut out = ast.clone();
    let mut counter = 0usize;
    for f in &mut out.functions {
        let this = f.name.clone();
        for _ in 0..32 {
            let mut changed = false;
            f.body = inline_block(&f.body, ast, &recursive, &this, &mut counter, &mut changed);
            if !changed {
                break;
            }
        }
    }
    out
}

/// Functions on a call-graph cycle (directly or mutually recursive).
fn recursive_functions(ast: &Ast) -> BTreeSet<String> {
    let mut calls: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for f in &ast.functions {
        let mut callees = BTreeSet::new();
        collect_calls_block(&f.body, &mut callees);
        calls.insert(&f.name, callees);
    }
    let mut recursive = BTreeSet::new();
    for f in &ast.functions {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<String> = calls
            .get(f.name.as_str())
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default();
        while let Some(callee) = stack.pop() {
            if callee == f.name {
                recursive.insert(f.name.clone());
                break;
            }
            if seen.insert(callee.clone()) {
                if let Some(next) = calls.get(callee.as_str()) {
                    stack.extend(next.iter().cloned());
                }
            }
        }
    }
    recursive
}

fn collect_calls_block(b: &Block, out: &mut BTreeSet<String>) {
    for s in &b.stmts {
        match &s.node {
            Stmt::Call { name, args } => {
                out.insert(name.clone());
                for a in args {
                    collect_calls_expr(&a.node, out);
                }
            }
            Stmt::Assign(a) | Stmt::AtomicWrite(a) => collect_calls_expr(&a.value.node, out),
            Stmt::Decl(d) => {
                if let Some(i) = &d.init {
                    collect_calls_expr(&i.node, out);
                }
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                collect_calls_expr(&cond.node, out);
                collect_calls_block(then_body, out);
                if let Some(e) = else_body {
                    collect_calls_block(e, out);
                }
            }
            Stmt::For(f) => collect_calls_block(&f.body, out),
            Stmt::While { cond, body } | Stmt::DoWhile { body, cond } => {
                collect_calls_expr(&cond.node, out);
                collect_calls_block(body, out);
            }
            Stmt::Parallel(r) => collect_calls_block(&r.body, out),
            Stmt::OmpFor(of) => collect_calls_block(&of.loop_.body, out),
            Stmt::OmpSections(ss) => {
                for sec in &ss.sections {
                    collect_calls_block(sec, out);
                }
            }
            Stmt::OmpSingle { body } => collect_calls_block(body, out),
            Stmt::Break | Stmt::Barrier => {}
        }
    }
}

fn collect_calls_expr(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Call { name, args } => {
            out.insert(name.clone());
            for a in args {
                collect_calls_expr(&a.node, out);
            }
        }
        Expr::Index { index, .. } => collect_calls_expr(&index.node, out),
        Expr::Unary { operand, .. } => collect_calls_expr(&operand.node, out),
        Expr::Binary { lhs, rhs, .. } => {
            collect_calls_expr(&lhs.node, out);
            collect_calls_expr(&rhs.node, out);
        }
        Expr::Assign { value, .. } => collect_calls_expr(&value.node, out),
        Expr::IntLit(_) | Expr::FloatLit(_) | Expr::Var(_) => {}
    }
}

fn inline_block(
    b: &Block,
    ast: &Ast,
    recursive: &BTreeSet<String>,
    current: &str,
    counter: &mut usize,
    changed: &mut bool,
) -> Block {
    let mut stmts = Vec::new();
    for s in &b.stmts {
        match &s.node {
            Stmt::Call { name, args } if name != current && !recursive.contains(name) => {
                match try_expand(ast, name, args, s.span, counter) {
                    Some(expansion) => {
                        *changed = true;
                        stmts.extend(expansion);
                    }
                    None => stmts.push(s.clone()),
                }
            }
            _ => {
                let node = map_stmt_blocks(&s.node, &mut |inner| {
                    inline_block(inner, ast, recursive, current, counter, changed)
                });
                stmts.push(Sp::new(node, s.span));
            }
        }
    }
    Block::new(stmts)
}

/// Expand one call site: bind scalar args to fresh temps, substitute array
/// names, and rename callee-local declarations to avoid capture.
fn try_expand(
    ast: &Ast,
    name: &str,
    args: &[Sp<Expr>],
    span: Span,
    counter: &mut usize,
) -> Option<Vec<Sp<Stmt>>> {
    let callee = ast.function(name)?;
    if callee.params.len() != args.len() {
        return None;
    }
    *counter += 1;
    let id = *counter;

    let mut renames: BTreeMap<String, String> = BTreeMap::new();
    let mut prologue = Vec::new();
    for (p, a) in callee.params.iter().zip(args) {
        if p.is_array {
            // Array arguments must be plain names.
            match &a.node {
                Expr::Var(arg_name) => {
                    renames.insert(p.name.clone(), arg_name.clone());
                }
                _ => return None,
            }
        } else {
            let tmp = format!("{}_{}_{}", name, p.name, id);
            prologue.push(Sp::new(
                Stmt::Decl(Decl {
                    ty: p.ty,
                    name: tmp.clone(),
                    array_len: None,
                    init: Some(a.clone()),
                    init_list: Vec::new(),
                }),
                span,
            ));
            renames.insert(p.name.clone(), tmp);
        }
    }
    for local in declared_names(&callee.body) {
        renames.insert(local.clone(), format!("{local}_{name}_{id}"));
    }

    let mut body = rename_block(&callee.body, &renames);
    prologue.append(&mut body.stmts);
    Some(prologue)
}

fn declared_names(b: &Block) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn walk(b: &Block, out: &mut BTreeSet<String>) {
        for s in &b.stmts {
            if let Stmt::Decl(d) = &s.node {
                out.insert(d.name.clone());
            }
            map_stmt_blocks(&s.node, &mut |inner| {
                walk(inner, out);
                inner.clone()
            });
        }
    }
    walk(b, &mut out);
    out
}

fn rename_block(b: &Block, renames: &BTreeMap<String, String>) -> Block {
    Block::new(
        b.stmts
            .iter()
            .map(|s| Sp::new(rename_stmt(&s.node, renames), s.span))
            .collect(),
    )
}

fn rename_stmt(s: &Stmt, renames: &BTreeMap<String, String>) -> Stmt {
    let rn = |n: &String| renames.get(n).cloned().unwrap_or_else(|| n.clone());
    match s {
        Stmt::Decl(d) => Stmt::Decl(Decl {
            ty: d.ty,
            name: rn(&d.name),
            array_len: d.array_len.as_ref().map(|e| rename_expr_sp(e, renames)),
            init: d.init.as_ref().map(|e| rename_expr_sp(e, renames)),
            init_list: d
                .init_list
                .iter()
                .map(|e| rename_expr_sp(e, renames))
                .collect(),
        }),
        Stmt::Assign(a) => Stmt::Assign(rename_assign(a, renames)),
        Stmt::AtomicWrite(a) => Stmt::AtomicWrite(rename_assign(a, renames)),
        Stmt::If {
            cond,
            then_body,
            else_body,
        } => Stmt::If {
            cond: rename_expr_sp(cond, renames),
            then_body: rename_block(then_body, renames),
            else_body: else_body.as_ref().map(|e| rename_block(e, renames)),
        },
        Stmt::For(f) => Stmt::For(ForLoop {
            var: rn(&f.var),
            init: rename_expr_sp(&f.init, renames),
            bound: rename_expr_sp(&f.bound, renames),
            step: rename_expr_sp(&f.step, renames),
            body: rename_block(&f.body, renames),
        }),
        Stmt::While { cond, body } => Stmt::While {
            cond: rename_expr_sp(cond, renames),
            body: rename_block(body, renames),
        },
        Stmt::DoWhile { body, cond } => Stmt::DoWhile {
            body: rename_block(body, renames),
            cond: rename_expr_sp(cond, renames),
        },
        Stmt::Call { name, args } => Stmt::Call {
            name: name.clone(),
            args: args.iter().map(|a| rename_expr_sp(a, renames)).collect(),
        },
        Stmt::Parallel(r) => Stmt::Parallel(ParallelRegion {
            num_threads: r.num_threads.as_ref().map(|e| rename_expr_sp(e, renames)),
            body: rename_block(&r.body, renames),
        }),
        Stmt::OmpFor(of) => Stmt::OmpFor(OmpFor {
            schedule: of.schedule.clone(),
            nowait: of.nowait,
            loop_: ForLoop {
                var: rn(&of.loop_.var),
                init: rename_expr_sp(&of.loop_.init, renames),
                bound: rename_expr_sp(&of.loop_.bound, renames),
                step: rename_expr_sp(&of.loop_.step, renames),
                body: rename_block(&of.loop_.body, renames),
            },
        }),
        Stmt::OmpSections(ss) => Stmt::OmpSections(OmpSections {
            sections: ss
                .sections
                .iter()
                .map(|b| rename_block(b, renames))
                .collect(),
            nowait: ss.nowait,
        }),
        Stmt::OmpSingle { body } => Stmt::OmpSingle {
            body: rename_block(body, renames),
        },
        Stmt::Break => Stmt::Break,
        Stmt::Barrier => Stmt::Barrier,
    }
}

fn rename_assign(a: &Assign, renames: &BTreeMap<String, String>) -> Assign {
    Assign {
        target: rename_lvalue(&a.target, renames),
        value: rename_expr_sp(&a.value, renames),
    }
}

fn rename_lvalue(l: &LValue, renames: &BTreeMap<String, String>) -> LValue {
    let rn = |n: &String| renames.get(n).cloned().unwrap_or_else(|| n.clone());
    match l {
        LValue::Var(n) => LValue::Var(rn(n)),
        LValue::Index { array, index } => LValue::Index {
            array: rn(array),
            index: rename_expr_sp(index, renames),
        },
    }
}

fn rename_expr_sp(e: &Sp<Expr>, renames: &BTreeMap<String, String>) -> Sp<Expr> {
    Sp::new(rename_expr(&e.node, renames), e.span)
}

fn rename_expr(e: &Expr, renames: &BTreeMap<String, String>) -> Expr {
    let rn = |n: &String| renames.get(n).cloned().unwrap_or_else(|| n.clone());
    match e {
        Expr::Var(n) => Expr::Var(rn(n)),
        Expr::Index { array, index } => Expr::Index {
            array: rn(array),
            index: Box::new(rename_expr_sp(index, renames)),
        },
        Expr::Unary { op, operand } => Expr::Unary {
            op: *op,
            operand: Box::new(rename_expr_sp(operand, renames)),
        },
        Expr::Binary { op, lhs, rhs } => Expr::Binary {
            op: *op,
            lhs: Box::new(rename_expr_sp(lhs, renames)),
            rhs: Box::new(rename_expr_sp(rhs, renames)),
        },
        Expr::Call { name, args } => Expr::Call {
            name: name.clone(),
            args: args.iter().map(|a| rename_expr_sp(a, renames)).collect(),
        },
        Expr::Assign { target, value } => Expr::Assign {
            target: Box::new(rename_lvalue(target, renames)),
            value: Box::new(rename_expr_sp(value, renames)),
        },
        Expr::IntLit(_) | Expr::FloatLit(_) => e.clone(),
    }
}

/// Rebuild a statement with every nested block passed through `f`.
fn map_stmt_blocks(s: &Stmt, f: &mut impl FnMut(&Block) -> Block) -> Stmt {
    match s {
        Stmt::If {
            cond,
            then_body,
            else_body,
        } => Stmt::If {
            cond: cond.clone(),
            then_body: f(then_body),
            else_body: else_body.as_ref().map(&mut *f),
        },
        Stmt::For(l) => Stmt::For(ForLoop {
            body: f(&l.body),
            ..l.clone()
        }),
        Stmt::While { cond, body } => Stmt::While {
            cond: cond.clone(),
            body: f(body),
        },
        Stmt::DoWhile { body, cond } => Stmt::DoWhile {
            body: f(body),
            cond: cond.clone(),
        },
        Stmt::Parallel(r) => Stmt::Parallel(ParallelRegion {
            num_threads: r.num_threads.clone(),
            body: f(&r.body),
        }),
        Stmt::OmpFor(of) => Stmt::OmpFor(OmpFor {
            schedule: of.schedule.clone(),
            nowait: of.nowait,
            loop_: ForLoop {
                body: f(&of.loop_.body),
                ..of.loop_.clone()
            },
        }),
        Stmt::OmpSections(ss) => Stmt::OmpSections(OmpSections {
            sections: ss.sections.iter().map(&mut *f).collect(),
            nowait: ss.nowait,
        }),
        Stmt::OmpSingle { body } => Stmt::OmpSingle { body: f(body) },
        other => other.clone(),
    }
}

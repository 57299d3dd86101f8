//! Constant folding over integer expressions, used for trip counts and
//! thread-count clauses.

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::ast::*;

/// Scalars that are provably constant inside one function: declared with a
/// constant integer initializer and never assigned again.
#[derive(Debug, Clone, Default)]
pub struct ConstEnv {
    map: BTreeMap<String, i64>,
}

impl ConstEnv {
    pub fn empty() -> Self {
        ConstEnv::default()
    }

    pub fn from_function(ast: &Ast, f: &FunctionDef) -> Self {
        // names written by anything other than their declaration
        let mut reassigned = BTreeSet::new();
        for fun in &ast.functions {
            collect_reassigned(&fun.body, &mut reassigned);
        }
        let mut candidates: BTreeMap<String, i64> = BTreeMap::new();
        let mut decl_counts: BTreeMap<String, usize> = BTreeMap::new();
        for g in &ast.globals {
            *decl_counts.entry(g.node.name.clone()).or_insert(0) += 1;
            if let Some(v) = g.node.init.as_ref().and_then(|e| fold_int(&e.node)) {
                candidates.insert(g.node.name.clone(), v);
            }
        }
        collect_local_consts(&f.body, &mut candidates, &mut decl_counts);
        let map = candidates
            .into_iter()
            .filter(|(name, _)| !reassigned.contains(name) && decl_counts[name] == 1)
            .collect();
        ConstEnv { map }
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.map.get(name).copied()
    }
}

fn collect_local_consts(
    b: &Block,
    out: &mut BTreeMap<String, i64>,
    decl_counts: &mut BTreeMap<String, usize>,
) {
    for s in &b.stmts {
        if let Stmt::Decl(d) = &s.node {
            *decl_counts.entry(d.name.clone()).or_insert(0) += 1;
            if d.array_len.is_none() {
                if let Some(v) = d.init.as_ref().and_then(|e| fold_int(&e.node)) {
                    out.insert(d.name.clone(), v);
                }
            }
        }
        match &s.node {
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_local_consts(then_body, out, decl_counts);
                if let Some(e) = else_body {
                    collect_local_consts(e, out, decl_counts);
                }
            }
            Stmt::For(f) => collect_local_consts(&f.body, out, decl_counts),
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } => {
                collect_local_consts(body, out, decl_counts)
            }
            Stmt::Parallel(r) => collect_local_consts(&r.body, out, decl_counts),
            Stmt::OmpFor(of) => collect_local_consts(&of.loop_.body, out, decl_counts),
            Stmt::OmpSections(ss) => {
                for sec in &ss.sections {
                    collect_local_consts(sec, out, decl_counts);
                }
            }
            Stmt::OmpSingle { body } => collect_local_consts(body, out, decl_counts),
            _ => {}
        }
    }
}

/// Names written outside their declaration: assignment targets, atomic
/// targets and loop variables.
fn collect_reassigned(b: &Block, out: &mut BTreeSet<String>) {
    for s in &b.stmts {
        match &s.node {
            Stmt::Assign(a) | Stmt::AtomicWrite(a) => {
                out.insert(a.target.name().to_string());
            }
            Stmt::Decl(d) => {
                if let Some(init) = &d.init {
                    collect_expr_assigns(&init.node, out);
                }
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                collect_expr_assigns(&cond.node, out);
                collect_reassigned(then_body, out);
                if let Some(e) = else_body {
                    collect_reassigned(e, out);
                }
            }
            Stmt::For(f) => {
                out.insert(f.var.clone());
                collect_reassigned(&f.body, out);
            }
            Stmt::While { cond, body } | Stmt::DoWhile { body, cond } => {
                collect_expr_assigns(&cond.node, out);
                collect_reassigned(body, out);
            }
            Stmt::Parallel(r) => collect_reassigned(&r.body, out),
            Stmt::OmpFor(of) => {
                out.insert(of.loop_.var.clone());
                collect_reassigned(&of.loop_.body, out);
            }
            Stmt::OmpSections(ss) => {
                for sec in &ss.sections {
                    collect_reassigned(sec, out);
                }
            }
            Stmt::OmpSingle { body } => collect_reassigned(body, out),
            Stmt::Call { .. } | Stmt::Break | Stmt::Barrier => {}
        }
    }
}

fn collect_expr_assigns(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Assign { target, value } => {
            out.insert(target.name().to_string());
            collect_expr_assigns(&value.node, out);
        }
        Expr::Unary { operand, .. } => collect_expr_assigns(&operand.node, out),
        Expr::Binary { lhs, rhs, .. } => {
            collect_expr_assigns(&lhs.node, out);
            collect_expr_assigns(&rhs.node, out);
        }
        Expr::Call { args, .. } => {
            for a in args {
                collect_expr_assigns(&a.node, out);
            }
        }
        Expr::Index { index, .. } => collect_expr_assigns(&index.node, out),
        Expr::IntLit(_) | Expr::FloatLit(_) | Expr::Var(_) => {}
    }
}

/// Fold a literal-only integer expression.
pub fn fold_int(e: &Expr) -> Option<i64> {
    fold_int_env(e, &ConstEnv::default())
}

pub fn fold_int_env(e: &Expr, env: &ConstEnv) -> Option<i64> {
    match e {
        Expr::IntLit(v) => Some(*v),
        Expr::Var(n) => env.get(n),
        Expr::Unary {
            op: UnOp::Neg,
            operand,
        } => fold_int_env(&operand.node, env).map(|v| -v),
        Expr::Binary { op, lhs, rhs } => {
            let l = fold_int_env(&lhs.node, env)?;
            let r = fold_int_env(&rhs.node, env)?;
            match op {
                BinOp::Add => l.checked_add(r),
                BinOp::Sub => l.checked_sub(r),
                BinOp::Mul => l.checked_mul(r),
                BinOp::Div => {
                    if r != 0 {
                        Some(l / r)
                    } else {
                        None
                    }
                }
                BinOp::Mod => {
                    if r != 0 {
                        Some(l % r)
                    } else {
                        None
                    }
                }
                BinOp::Shl => l.checked_shl(r.try_into().ok()?),
                BinOp::Shr => l.checked_shr(r.try_into().ok()?),
                BinOp::BitAnd => Some(l & r),
                BinOp::BitOr => Some(l | r),
                BinOp::BitXor => Some(l ^ r),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Trip count of a canonical loop when init, bound and step fold.
pub fn trip_count(lp: &ForLoop, env: &ConstEnv) -> Option<i64> {
    let init = fold_int_env(&lp.init.node, env)?;
    let bound = fold_int_env(&lp.bound.node, env)?;
    let step = fold_int_env(&lp.step.node, env)?;
    if step <= 0 {
        return None;
    }
    if bound <= init {
        Some(0)
    } else {
        Some((bound - init + step - 1) / step)
    }
}

/// The closed-form N_ITRS expression of a canonical loop, for plans whose
/// trip count is only known at run time.
pub fn n_itrs_expr(lp: &ForLoop) -> Expr {
    let step = fold_int(&lp.step.node);
    let span = lp.bound.span;
    let diff = match (&lp.init.node, fold_int(&lp.init.node)) {
        (_, Some(0)) => lp.bound.node.clone(),
        _ => Expr::Binary {
            op: BinOp::Sub,
            lhs: Box::new(lp.bound.clone()),
            rhs: Box::new(lp.init.clone()),
        },
    };
    match step {
        Some(1) => diff,
        _ => {
            // (bound - init + (step - 1)) / step
            let num = Expr::Binary {
                op: BinOp::Add,
                lhs: Box::new(Sp::new(diff, span)),
                rhs: Box::new(Sp::new(
                    Expr::Binary {
                        op: BinOp::Sub,
                        lhs: Box::new(lp.step.clone()),
                        rhs: Box::new(Sp::new(Expr::IntLit(1), span)),
                    },
                    span,
                )),
            };
            Expr::Binary {
                op: BinOp::Div,
                lhs: Box::new(Sp::new(num, span)),
                rhs: Box::new(lp.step.clone()),
            }
        }
    }
}

//! The transformation phase: rewrite each parallel segment per its plan.
//!
//! * `omp for` becomes the worklist form: `initialize(k, n, chunk)`, a
//!   barrier, the guarded consumption loop `while ((i = doitr(tid)) != -1)`,
//!   a trailing barrier, and `update_scaledend_k()` when the loop can
//!   re-execute. Fixed-size loops call `doitr_nosteal` instead.
//! * `omp sections` (and `single`) become a `schedule(static, 1)` loop of
//!   `max_per_thread * N_THREADS` iterations whose body dispatches section
//!   bodies by iteration index; unmatched iterations are no-ops.
//! * plain blocks with migration pairs get the attacker scan at each `mp`
//!   and the atomic progress publish at each `mgp`.
//!
//! The emitted program stays in the input dialect and re-parses; the
//! support arrays are declared once, at global scope.

use crate::frontend::ast::*;
use crate::frontend::{emit_source, SegmentKind};
use crate::plan::{Analysis, RegionAnalysis, SegmentPlan};
use crate::scheduler::{LoopPlan, MigrationPlan, NItrs, SectionAssignment};

/// Names the transformation owns. Programs that already use any of them are
/// rejected rather than rewritten twice.
pub const RESERVED_ARRAYS: [&str; 6] = ["itr", "end", "status", "lock", "mg", "chunk"];
pub const RESERVED_SCALARS: [&str; 2] = ["tid", "mgi"];
pub const RESERVED_FUNCTIONS: [&str; 7] = [
    "initialize",
    "doitr",
    "doitr_nosteal",
    "getthread",
    "lock_update",
    "migrate",
    "inbig",
];
/// `inLITTLE` and `secitr` complete the set; `scaledend_<k>` and
/// `update_scaledend_<k>` match by prefix.
pub const RESERVED_EXTRA: [&str; 2] = ["inLITTLE", "secitr"];

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("reserved identifiers present: `{0}` (program already transformed?)")]
    ReservedIdentifiers(String),
    #[error("no plan for region {region} segment {segment}")]
    PlanMismatch { region: usize, segment: usize },
}

pub fn is_reserved(name: &str) -> bool {
    RESERVED_ARRAYS.contains(&name)
        || RESERVED_SCALARS.contains(&name)
        || RESERVED_FUNCTIONS.contains(&name)
        || RESERVED_EXTRA.contains(&name)
        || is_scaledend_name(name)
        || name
            .strip_prefix("update_")
            .map(is_scaledend_name)
            .unwrap_or(false)
}

fn is_scaledend_name(name: &str) -> bool {
    name.strip_prefix("scaledend_")
        .map(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        .unwrap_or(false)
}

/// First reserved identifier appearing anywhere in the program, if any.
pub fn find_reserved(ast: &Ast) -> Option<String> {
    let mut found: Option<String> = None;
    let mut check = |name: &str| {
        if found.is_none() && is_reserved(name) {
            found = Some(name.to_string());
        }
    };
    for g in &ast.globals {
        check(&g.node.name);
    }
    for f in &ast.functions {
        check(&f.name);
        for p in &f.params {
            check(&p.name);
        }
        scan_block(&f.body, &mut check);
    }
    found
}

fn scan_block(b: &Block, check: &mut impl FnMut(&str)) {
    for s in &b.stmts {
        scan_stmt(&s.node, check);
    }
}

fn scan_stmt(s: &Stmt, check: &mut impl FnMut(&str)) {
    match s {
        Stmt::Decl(d) => {
            check(&d.name);
            if let Some(l) = &d.array_len {
                scan_expr(&l.node, check);
            }
            if let Some(i) = &d.init {
                scan_expr(&i.node, check);
            }
            for e in &d.init_list {
                scan_expr(&e.node, check);
            }
        }
        Stmt::Assign(a) | Stmt::AtomicWrite(a) => {
            check(a.target.name());
            if let LValue::Index { index, .. } = &a.target {
                scan_expr(&index.node, check);
            }
            scan_expr(&a.value.node, check);
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
        } => {
            scan_expr(&cond.node, check);
            scan_block(then_body, check);
            if let Some(e) = else_body {
                scan_block(e, check);
            }
        }
        Stmt::For(f) => {
            check(&f.var);
            scan_expr(&f.init.node, check);
            scan_expr(&f.bound.node, check);
            scan_expr(&f.step.node, check);
            scan_block(&f.body, check);
        }
        Stmt::While { cond, body } | Stmt::DoWhile { body, cond } => {
            scan_expr(&cond.node, check);
            scan_block(body, check);
        }
        Stmt::Call { name, args } => {
            check(name);
            for a in args {
                scan_expr(&a.node, check);
            }
        }
        Stmt::Parallel(r) => {
            if let Some(e) = &r.num_threads {
                scan_expr(&e.node, check);
            }
            scan_block(&r.body, check);
        }
        Stmt::OmpFor(of) => {
            check(&of.loop_.var);
            scan_expr(&of.loop_.init.node, check);
            scan_expr(&of.loop_.bound.node, check);
            scan_expr(&of.loop_.step.node, check);
            scan_block(&of.loop_.body, check);
        }
        Stmt::OmpSections(ss) => {
            for sec in &ss.sections {
                scan_block(sec, check);
            }
        }
        Stmt::OmpSingle { body } => scan_block(body, check),
        Stmt::Break | Stmt::Barrier => {}
    }
}

fn scan_expr(e: &Expr, check: &mut impl FnMut(&str)) {
    match e {
        Expr::Var(n) => check(n),
        Expr::Index { array, index } => {
            check(array);
            scan_expr(&index.node, check);
        }
        Expr::Unary { operand, .. } => scan_expr(&operand.node, check),
        Expr::Binary { lhs, rhs, .. } => {
            scan_expr(&lhs.node, check);
            scan_expr(&rhs.node, check);
        }
        Expr::Call { name, args } => {
            check(name);
            for a in args {
                scan_expr(&a.node, check);
            }
        }
        Expr::Assign { target, value } => {
            check(target.name());
            if let LValue::Index { index, .. } = target.as_ref() {
                scan_expr(&index.node, check);
            }
            scan_expr(&value.node, check);
        }
        Expr::IntLit(_) | Expr::FloatLit(_) => {}
    }
}

// ---- expression building helpers ----------------------------------------

fn sp<T>(node: T) -> Sp<T> {
    Sp::new(node, Span::default())
}

fn var(name: &str) -> Sp<Expr> {
    sp(Expr::Var(name.to_string()))
}

fn int(v: i64) -> Sp<Expr> {
    sp(Expr::IntLit(v))
}

fn float(v: f64) -> Sp<Expr> {
    sp(Expr::FloatLit(v))
}

fn call(name: &str, args: Vec<Sp<Expr>>) -> Sp<Expr> {
    sp(Expr::Call {
        name: name.to_string(),
        args,
    })
}

fn bin(op: BinOp, lhs: Sp<Expr>, rhs: Sp<Expr>) -> Sp<Expr> {
    sp(Expr::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
    })
}

fn call_stmt(name: &str, args: Vec<Sp<Expr>>) -> Sp<Stmt> {
    sp(Stmt::Call {
        name: name.to_string(),
        args,
    })
}

fn assign_stmt(target: &str, value: Sp<Expr>) -> Sp<Stmt> {
    sp(Stmt::Assign(Assign {
        target: LValue::Var(target.to_string()),
        value,
    }))
}

fn index_expr(array: &str, index: Sp<Expr>) -> Sp<Expr> {
    sp(Expr::Index {
        array: array.to_string(),
        index: Box::new(index),
    })
}

// ---- per-construct transforms --------------------------------------------

/// The worklist form of one `omp for`.
pub fn transform_for(
    of: &OmpFor,
    plan: &LoopPlan,
    ordinal: usize,
    barrier_after: bool,
) -> Vec<Sp<Stmt>> {
    let mut out = Vec::new();
    let n_expr = match &plan.n_itrs {
        NItrs::Const(n) => int(*n),
        NItrs::Symbolic(_) => sp(crate::workload::fold::n_itrs_expr(&of.loop_)),
    };
    out.push(call_stmt(
        "initialize",
        vec![int(ordinal as i64), n_expr, int(plan.chunk)],
    ));
    out.push(sp(Stmt::Barrier));

    let doitr_name = if plan.fixed_size {
        "doitr_nosteal"
    } else {
        "doitr"
    };
    let v = of.loop_.var.clone();
    let cond = bin(
        BinOp::Ne,
        sp(Expr::Assign {
            target: Box::new(LValue::Var(v.clone())),
            value: Box::new(call(doitr_name, vec![var("tid")])),
        }),
        sp(Expr::Unary {
            op: UnOp::Neg,
            operand: Box::new(int(1)),
        }),
    );
    let mut body = Vec::new();
    let trivial_range = matches!(
        (
            crate::workload::fold::fold_int(&of.loop_.init.node),
            crate::workload::fold::fold_int(&of.loop_.step.node)
        ),
        (Some(0), Some(1))
    );
    if !trivial_range {
        // remap the logical worklist index into the loop's index space
        body.push(assign_stmt(
            &v,
            bin(
                BinOp::Add,
                of.loop_.init.clone(),
                bin(BinOp::Mul, var(&v), of.loop_.step.clone()),
            ),
        ));
    }
    body.extend(of.loop_.body.stmts.iter().cloned());
    out.push(sp(Stmt::While {
        cond,
        body: Block::new(body),
    }));

    if barrier_after {
        out.push(sp(Stmt::Barrier));
    }
    if plan.reentrant {
        out.push(call_stmt(&format!("update_scaledend_{ordinal}"), vec![]));
    }
    out
}

/// Sections become a static unit-chunk loop; iteration `j*T + t` runs thread
/// `t`'s `j`-th assigned section, or nothing.
pub fn transform_sections(
    ss: &OmpSections,
    assignment: &SectionAssignment,
    nowait: bool,
) -> Vec<Sp<Stmt>> {
    let t = assignment.n_threads;
    let n_itrs = assignment.n_itrs() as i64;
    let mut dispatch = Vec::new();
    for thread in 0..t {
        for (j, s) in assignment.sections_of(thread).into_iter().enumerate() {
            let k = (j * t + thread) as i64;
            dispatch.push((k, ss.sections[s].clone()));
        }
    }
    dispatch.sort_by_key(|(k, _)| *k);

    let mut body = Vec::new();
    for (k, section_body) in dispatch {
        body.push(sp(Stmt::If {
            cond: bin(BinOp::Eq, var("secitr"), int(k)),
            then_body: section_body,
            else_body: None,
        }));
    }
    vec![sp(Stmt::OmpFor(OmpFor {
        schedule: Some(Schedule {
            kind: ScheduleKind::Static,
            chunk: Some(int(1)),
        }),
        nowait,
        loop_: ForLoop {
            var: "secitr".to_string(),
            init: int(0),
            bound: int(n_itrs),
            step: int(1),
            body: Block::new(body),
        },
    }))]
}

/// Thread-switching form of a plain block: attacker scans at each `mp`,
/// big-hosted threads publish progress at each `mgp`. Blocks with empty
/// plans come back unchanged.
pub fn transform_migration(block: &Block, plan: &MigrationPlan, n_threads: usize) -> Vec<Sp<Stmt>> {
    if plan.is_empty() {
        return block.stmts.clone();
    }
    let mut out = Vec::new();
    for boundary in 0..=block.stmts.len() {
        // publish before scan so a same-boundary pair can trigger
        for pair in plan.pairs.iter().filter(|p| p.mgp == boundary) {
            out.push(sp(Stmt::If {
                cond: call("inbig", vec![var("tid")]),
                then_body: Block::new(vec![sp(Stmt::AtomicWrite(Assign {
                    target: LValue::Index {
                        array: "mg".to_string(),
                        index: var("tid"),
                    },
                    value: int(pair.pt as i64),
                }))]),
                else_body: None,
            }));
        }
        for pair in plan.pairs.iter().filter(|p| p.mp == boundary) {
            let scan_cond = bin(
                BinOp::And,
                bin(BinOp::Ge, index_expr("mg", var("mgi")), int(pair.pt as i64)),
                call("inbig", vec![var("mgi")]),
            );
            let scan_loop = sp(Stmt::While {
                cond: bin(BinOp::Lt, var("mgi"), int(n_threads as i64)),
                body: Block::new(vec![
                    sp(Stmt::If {
                        cond: scan_cond,
                        then_body: Block::new(vec![
                            call_stmt("migrate", vec![var("tid"), var("mgi")]),
                            sp(Stmt::Break),
                        ]),
                        else_body: None,
                    }),
                    assign_stmt("mgi", bin(BinOp::Add, var("mgi"), int(1))),
                ]),
            });
            out.push(sp(Stmt::If {
                cond: call("inLITTLE", vec![var("tid")]),
                then_body: Block::new(vec![assign_stmt("mgi", int(0)), scan_loop]),
                else_body: None,
            }));
        }
        if boundary < block.stmts.len() {
            out.push(block.stmts[boundary].clone());
        }
    }
    out
}

// ---- whole-program transform ---------------------------------------------

/// Rewrite every analyzed region and emit the transformed program text.
pub fn transform_program(analysis: &Analysis) -> Result<String, TransformError> {
    Ok(emit_source(&transform_ast(analysis)?))
}

pub fn transform_ast(analysis: &Analysis) -> Result<Ast, TransformError> {
    if let Some(name) = find_reserved(&analysis.ast) {
        return Err(TransformError::ReservedIdentifiers(name));
    }
    let mut ast = analysis.ast.clone();
    let mut region_iter = analysis.regions.iter();
    for f in &mut ast.functions {
        f.body = rewrite_block(&f.body, &mut region_iter)?;
    }

    let mut globals = support_decls(analysis);
    globals.append(&mut ast.globals);
    ast.globals = globals;
    Ok(ast)
}

/// Walk the function bodies in analyzer order, replacing each parallel
/// region with its transformed form.
fn rewrite_block<'a>(
    b: &Block,
    regions: &mut std::slice::Iter<'a, RegionAnalysis>,
) -> Result<Block, TransformError> {
    let mut stmts = Vec::with_capacity(b.stmts.len());
    for s in &b.stmts {
        match &s.node {
            Stmt::Parallel(region) => {
                let analysis = regions.next().ok_or(TransformError::PlanMismatch {
                    region: usize::MAX,
                    segment: 0,
                })?;
                stmts.push(Sp::new(
                    Stmt::Parallel(ParallelRegion {
                        num_threads: region.num_threads.clone(),
                        body: rewrite_region(analysis)?,
                    }),
                    s.span,
                ));
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => stmts.push(Sp::new(
                Stmt::If {
                    cond: cond.clone(),
                    then_body: rewrite_block(then_body, regions)?,
                    else_body: match else_body {
                        Some(e) => Some(rewrite_block(e, regions)?),
                        None => None,
                    },
                },
                s.span,
            )),
            Stmt::For(lp) => stmts.push(Sp::new(
                Stmt::For(ForLoop {
                    body: rewrite_block(&lp.body, regions)?,
                    ..lp.clone()
                }),
                s.span,
            )),
            Stmt::While { cond, body } => stmts.push(Sp::new(
                Stmt::While {
                    cond: cond.clone(),
                    body: rewrite_block(body, regions)?,
                },
                s.span,
            )),
            Stmt::DoWhile { body, cond } => stmts.push(Sp::new(
                Stmt::DoWhile {
                    body: rewrite_block(body, regions)?,
                    cond: cond.clone(),
                },
                s.span,
            )),
            _ => stmts.push(s.clone()),
        }
    }
    Ok(Block::new(stmts))
}

fn rewrite_region(analysis: &RegionAnalysis) -> Result<Block, TransformError> {
    let mut stmts = Vec::new();
    let last = analysis.segments.len().saturating_sub(1);
    for (si, seg) in analysis.segments.iter().enumerate() {
        let is_last = si == last;
        match (&seg.plan, seg.segment.kind) {
            (SegmentPlan::For(plan), SegmentKind::WorksharingFor) => {
                let of = seg.segment.as_omp_for().expect("segment kind");
                let emit_barrier = seg.segment.barrier_after && (!is_last || plan.reentrant);
                let ordinal = seg.loop_ordinal.expect("omp for segments carry an ordinal");
                stmts.extend(transform_for(of, plan, ordinal, emit_barrier));
            }
            (SegmentPlan::Sections(assignment), SegmentKind::WorksharingSections) => {
                let ss = seg.segment.as_sections().expect("segment kind");
                stmts.extend(transform_sections(
                    ss,
                    assignment,
                    !seg.segment.barrier_after,
                ));
            }
            (SegmentPlan::Single(assignment), SegmentKind::WorksharingSingle) => {
                let body = seg.segment.as_single().expect("segment kind");
                let ss = OmpSections {
                    sections: vec![body.clone()],
                    nowait: false,
                };
                stmts.extend(transform_sections(
                    &ss,
                    assignment,
                    !seg.segment.barrier_after,
                ));
            }
            (SegmentPlan::Block(plan), SegmentKind::PlainBlock) => {
                stmts.extend(transform_migration(
                    &seg.segment.body,
                    plan,
                    analysis.n_threads,
                ));
                if seg.segment.barrier_after && !is_last {
                    stmts.push(sp(Stmt::Barrier));
                }
            }
            _ => {
                return Err(TransformError::PlanMismatch {
                    region: analysis.region_ordinal,
                    segment: si,
                })
            }
        }
    }
    Ok(Block::new(stmts))
}

/// Global support declarations, sized for the widest team in the program.
fn support_decls(analysis: &Analysis) -> Vec<Sp<Decl>> {
    let max_threads = analysis
        .regions
        .iter()
        .map(|r| r.n_threads)
        .max()
        .unwrap_or(0);
    if max_threads == 0 {
        return Vec::new();
    }
    let has_for = analysis.regions.iter().any(|r| {
        r.segments
            .iter()
            .any(|s| matches!(s.plan, SegmentPlan::For(_)))
    });
    let has_sections = analysis.regions.iter().any(|r| {
        r.segments
            .iter()
            .any(|s| matches!(s.plan, SegmentPlan::Sections(_) | SegmentPlan::Single(_)))
    });
    let has_migration = analysis.regions.iter().any(|r| {
        r.segments
            .iter()
            .any(|s| matches!(&s.plan, SegmentPlan::Block(p) if !p.is_empty()))
    });

    let int_array = |name: &str| Decl {
        ty: ScalarType::Int,
        name: name.to_string(),
        array_len: Some(int(max_threads as i64)),
        init: None,
        init_list: Vec::new(),
    };
    let int_scalar = |name: &str| Decl {
        ty: ScalarType::Int,
        name: name.to_string(),
        array_len: None,
        init: None,
        init_list: Vec::new(),
    };

    let mut decls = Vec::new();
    let needs_tid = has_for || has_migration;
    if needs_tid {
        decls.push(sp(int_scalar("tid")));
    }
    if has_for {
        for name in ["itr", "end", "status", "lock"] {
            decls.push(sp(int_array(name)));
        }
        decls.push(sp(int_scalar("chunk")));
        for r in &analysis.regions {
            for s in &r.segments {
                if let (SegmentPlan::For(plan), Some(ordinal)) = (&s.plan, s.loop_ordinal) {
                    decls.push(sp(Decl {
                        ty: ScalarType::Double,
                        name: format!("scaledend_{ordinal}"),
                        array_len: Some(int(r.n_threads as i64)),
                        init: None,
                        init_list: plan.division.scaledend.iter().map(|&f| float(f)).collect(),
                    }));
                }
            }
        }
    }
    if has_sections {
        decls.push(sp(int_scalar("secitr")));
    }
    if has_migration {
        decls.push(sp(int_array("mg")));
        decls.push(sp(int_scalar("mgi")));
    }
    decls
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, SourceProgram};
    use crate::machine::MachineConfig;
    use crate::plan::analyze_program;

    fn analyze(src: &str) -> Analysis {
        let ast = parse(&SourceProgram::new("t.comp.c", src)).expect("parse");
        analyze_program(&ast, &MachineConfig::default(), None).expect("analyze")
    }

    fn figc_source() -> &'static str {
        "void main() {\n int t; int i; int j; double acc; double a[100];\n for (t = 0; t < 3; t++) {\n #pragma omp parallel\n {\n acc = 0.0;\n #pragma omp for\n for (i = 0; i < 100; i++) {\n for (j = 0; j < 500; j++) { acc = acc + a[i] * 0.5; }\n }\n acc = acc + 1.0;\n }\n }\n}"
    }

    #[test]
    fn figc_shape_becomes_the_worklist_form() {
        let analysis = analyze(figc_source());
        let text = transform_program(&analysis).unwrap();
        let init_pos = text.find("initialize(1, 100, ").expect("initialize call");
        let loop_pos = text
            .find("while ((i = doitr(tid)) != -1)")
            .expect("guarded consumption loop");
        let update_pos = text.find("update_scaledend_1();").expect("re-entry update");
        assert!(init_pos < loop_pos && loop_pos < update_pos);
        assert_eq!(text.matches("#pragma omp barrier").count(), 2);
        assert!(text.contains("double scaledend_1[8] = {"), "{text}");
        // emitted text must re-parse and be stable
        let reparsed = parse(&SourceProgram::new("t.ces.c", &text)).expect("output re-parses");
        let again = crate::frontend::emit_source(&reparsed);
        assert_eq!(text, again);
    }

    #[test]
    fn fixed_size_loop_drops_stealing_logic() {
        let analysis = analyze(
            "void main() {\n int i; int a[4096]; int b[4096];\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < 4096; i++) { b[i] = a[i]; }\n }\n}",
        );
        let text = transform_program(&analysis).unwrap();
        assert!(text.contains("doitr_nosteal(tid)"));
        assert!(!text.contains("getthread"));
        assert!(!text.contains("lock_update"));
    }

    #[test]
    fn non_reentrant_loop_has_no_update_call() {
        let analysis = analyze(
            "void main() {\n int i; double acc; double xs[512];\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < 512; i++) { acc = acc + xs[i] * 2.0 + xs[i] * xs[i] + acc * 0.5 + xs[i] / 3.0; }\n }\n}",
        );
        let text = transform_program(&analysis).unwrap();
        assert!(!text.contains("update_scaledend"));
    }

    #[test]
    fn non_zero_base_loop_remaps_the_index() {
        let analysis = analyze(
            "void main() {\n int i; double acc; double xs[512];\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 10; i < 500; i = i + 2) { acc = acc + xs[i] * 2.0 + xs[i] * xs[i] + acc * 0.5 + xs[i] / 3.0; }\n }\n}",
        );
        let text = transform_program(&analysis).unwrap();
        assert!(text.contains("i = 10 + i * 2;"), "{text}");
    }

    #[test]
    fn sections_rewrite_to_static_unit_chunk_for() {
        // the mixed-affinity corpus kernel: 8 sections over 8 threads land
        // one per thread, so N_ITRS = 8
        let analysis = analyze(crate::corpus::get("sec_like").unwrap().source);
        let text = transform_program(&analysis).unwrap();
        assert!(text.contains("#pragma omp for schedule(static, 1)"));
        assert!(
            text.contains("for (secitr = 0; secitr < 8; secitr++)"),
            "{text}"
        );
        assert_eq!(text.matches("if (secitr ==").count(), 8);
    }

    #[test]
    fn five_sections_on_four_threads_pad_to_eight() {
        let mut src = String::from(
            "void main() {\n int x[8];\n #pragma omp parallel num_threads(4)\n {\n #pragma omp sections\n {\n",
        );
        for k in 0..5 {
            src.push_str(&format!(" #pragma omp section\n {{ x[{k}] = {k}; }}\n"));
        }
        src.push_str(" }\n }\n}");
        let analysis = analyze(&src);
        let text = transform_program(&analysis).unwrap();
        assert!(
            text.contains("for (secitr = 0; secitr < 8; secitr++)"),
            "max 2 per thread * 4 threads = 8:\n{text}"
        );
        assert_eq!(
            text.matches("if (secitr ==").count(),
            5,
            "three empty iterations"
        );
    }

    #[test]
    fn single_becomes_one_section_dispatch() {
        let analysis = analyze(
            "void main() {\n int x[8];\n #pragma omp parallel num_threads(4)\n {\n #pragma omp single\n {\n x[0] = 1;\n }\n }\n}",
        );
        let text = transform_program(&analysis).unwrap();
        assert!(
            text.contains("for (secitr = 0; secitr < 4; secitr++)"),
            "{text}"
        );
        assert_eq!(text.matches("if (secitr ==").count(), 1);
    }

    #[test]
    fn migration_block_gets_scan_and_publish_sites() {
        let src = "void main() {\n int k1; int k2; int k3; int v1; int v2; int v3; int w1; int w2; int w3; int z;\n #pragma omp parallel\n {\n for (k1 = 0; k1 < 60000; k1++) { v1 = k1 * 3; w1 = k1 * 5; }\n for (k2 = 0; k2 < 60000; k2++) { v2 = k2 * 3; w2 = k2 * 5; }\n for (k3 = 0; k3 < 60000; k3++) { v3 = k3 * 3; w3 = k3 * 5; }\n z = v1 + v2 + v3;\n }\n}";
        let analysis = analyze(src);
        let has_pairs = matches!(
            &analysis.regions[0].segments[0].plan,
            SegmentPlan::Block(p) if !p.is_empty()
        );
        assert!(has_pairs, "fixture must produce at least one pair");
        let text = transform_program(&analysis).unwrap();
        assert!(text.contains("if (inLITTLE(tid))"), "{text}");
        assert!(text.contains("migrate(tid, mgi);"));
        assert!(text.contains("if (inbig(tid))"));
        assert!(text.contains("#pragma omp atomic"));
        assert!(text.contains("mg[tid] = 1;"));
        let reparsed = parse(&SourceProgram::new("t.ces.c", &text));
        assert!(reparsed.is_ok(), "{text}");
    }

    #[test]
    fn empty_migration_plan_is_identity() {
        let src = "void main() {\n double s;\n #pragma omp parallel\n {\n s = 1.0;\n }\n}";
        let analysis = analyze(src);
        let text = transform_program(&analysis).unwrap();
        assert!(text.contains("s = 1.0;"));
        assert!(!text.contains("inLITTLE"));
    }

    #[test]
    fn program_without_regions_is_unchanged_modulo_format() {
        let src = "void main() {\n double s;\n s = 2.5;\n}\n";
        let analysis = analyze(src);
        let text = transform_program(&analysis).unwrap();
        let direct = crate::frontend::emit_source(&analysis.ast);
        assert_eq!(text, direct);
    }

    #[test]
    fn transformed_program_is_rejected_on_second_pass() {
        let analysis = analyze(figc_source());
        let text = transform_program(&analysis).unwrap();
        let reparsed = parse(&SourceProgram::new("t.ces.c", &text)).unwrap();
        let err = analyze_program(&reparsed, &MachineConfig::default(), None)
            .map_err(|e| e.to_string())
            .and_then(|a| transform_ast(&a).map_err(|e| e.to_string()))
            .unwrap_err();
        assert!(err.contains("reserved identifiers"), "{err}");
    }

    #[test]
    fn scaledend_declared_exactly_once_per_loop() {
        let analysis = analyze(figc_source());
        let text = transform_program(&analysis).unwrap();
        assert_eq!(text.matches("double scaledend_1[").count(), 1);
        assert!(!text.contains("scaledend_2"));
    }
}

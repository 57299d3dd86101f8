//! Structural recognition of already-transformed programs.
//!
//! The simulator accepts the transformation's own output: a program using
//! the reserved support names is mapped back to segment plans (division
//! from the `scaledend_k` initializer, chunk and trip count from the
//! `initialize` call, section dispatch from the static unit-chunk loop,
//! migration pairs from the scan/publish sites), so a transformed program
//! simulates exactly like its source under the CES policy.

use std::collections::BTreeSet;

use super::build::SimError;
use crate::frontend::ast::*;
use crate::frontend::segment::{ParallelSegment, SegmentKind};
use crate::machine::MachineConfig;
use crate::plan::{Analysis, RegionAnalysis, SegmentAnalysis, SegmentPlan};
use crate::scheduler::migration::{gen_uses, live_at_boundaries, MigrationPair, MigrationPlan};
use crate::scheduler::{IterationDivision, LoopPlan, NItrs, SectionAssignment};
use crate::transform::find_reserved;
use crate::workload::{count_block, estimate_both, fold, per_iteration_counts, ConstEnv, OpCounts};

/// Reconstruct an [`Analysis`] from a transformed program, or `None` when
/// the program does not use the reserved support names.
pub fn recognize_transformed(
    ast: &Ast,
    machine: &MachineConfig,
) -> Result<Option<Analysis>, SimError> {
    if find_reserved(ast).is_none() {
        return Ok(None);
    }
    let mut regions = Vec::new();
    for f in &ast.functions {
        let env = ConstEnv::from_function(ast, f);
        collect_regions(ast, &f.body, f, &env, machine, &mut regions)?;
    }
    Ok(Some(Analysis {
        ast: ast.clone(),
        regions,
    }))
}

fn collect_regions(
    ast: &Ast,
    b: &Block,
    f: &FunctionDef,
    env: &ConstEnv,
    machine: &MachineConfig,
    regions: &mut Vec<RegionAnalysis>,
) -> Result<(), SimError> {
    for s in &b.stmts {
        match &s.node {
            Stmt::Parallel(region) => {
                let ordinal = regions.len();
                regions.push(reconstruct_region(ast, region, f, env, machine, ordinal)?);
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_regions(ast, then_body, f, env, machine, regions)?;
                if let Some(e) = else_body {
                    collect_regions(ast, e, f, env, machine, regions)?;
                }
            }
            Stmt::For(lp) => collect_regions(ast, &lp.body, f, env, machine, regions)?,
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } => {
                collect_regions(ast, body, f, env, machine, regions)?
            }
            _ => {}
        }
    }
    Ok(())
}

fn reconstruct_region(
    ast: &Ast,
    region: &ParallelRegion,
    f: &FunctionDef,
    env: &ConstEnv,
    machine: &MachineConfig,
    region_ordinal: usize,
) -> Result<RegionAnalysis, SimError> {
    let n_threads = match &region.num_threads {
        Some(e) => fold::fold_int_env(&e.node, env)
            .ok_or_else(|| SimError::Frontend("non-constant num_threads".into()))?
            as usize,
        None => machine.cores.len(),
    };
    let calib = &machine.calibration;

    let mut segments: Vec<SegmentAnalysis> = Vec::new();
    let stmts = &region.body.stmts;
    let mut i = 0usize;
    let mut plain: Vec<Sp<Stmt>> = Vec::new();
    let mut markers: Vec<(usize, usize, bool)> = Vec::new(); // (boundary, pt, is_mp)
    let mut any_reentrant = false;

    let close_plain = |segments: &mut Vec<SegmentAnalysis>,
                       plain: &mut Vec<Sp<Stmt>>,
                       markers: &mut Vec<(usize, usize, bool)>,
                       barrier: bool| {
        if plain.is_empty() && markers.is_empty() {
            if barrier {
                if let Some(last) = segments.last_mut() {
                    last.segment.barrier_after = true;
                }
            }
            return;
        }
        let body = Block::new(std::mem::take(plain));
        let pairs = pair_markers(std::mem::take(markers), &body, calib);
        let counts = count_block(&body, &ConstEnv::empty());
        segments.push(SegmentAnalysis {
            estimate: estimate_both(&counts, calib),
            counts,
            plan: SegmentPlan::Block(MigrationPlan {
                pairs,
                baseline_im_s: 0.0,
            }),
            loop_ordinal: None,
            segment: ParallelSegment {
                id: segments.len(),
                kind: SegmentKind::PlainBlock,
                body,
                region_id: 0,
                barrier_after: barrier,
            },
        });
    };

    while i < stmts.len() {
        match &stmts[i].node {
            // worklist form: initialize(k, n, chunk); barrier; while(...); [barrier]; [update]
            Stmt::Call { name, args } if name == "initialize" => {
                close_plain(&mut segments, &mut plain, &mut markers, false);
                let (seg, consumed, reentrant) =
                    reconstruct_loop(ast, &stmts[i..], args, env, machine, segments.len())?;
                any_reentrant |= reentrant;
                segments.push(seg);
                i += consumed;
            }
            // section dispatch: static unit-chunk loop over secitr
            Stmt::OmpFor(of) if of.loop_.var == "secitr" => {
                close_plain(&mut segments, &mut plain, &mut markers, false);
                segments.push(reconstruct_sections(
                    of,
                    n_threads,
                    env,
                    machine,
                    segments.len(),
                )?);
                i += 1;
            }
            Stmt::Barrier => {
                close_plain(&mut segments, &mut plain, &mut markers, true);
                i += 1;
            }
            // publish site: if (inbig(tid)) { mg[tid] = pt; }
            Stmt::If {
                cond, then_body, ..
            } if is_call_to(cond, "inbig") && publish_pt(then_body).is_some() => {
                let pt = publish_pt(then_body).expect("matched");
                markers.push((plain.len(), pt, false));
                i += 1;
            }
            // scan site: if (inLITTLE(tid)) { mgi = 0; while (...) {...} }
            Stmt::If {
                cond, then_body, ..
            } if is_call_to(cond, "inLITTLE") && scan_pt(then_body).is_some() => {
                let pt = scan_pt(then_body).expect("matched");
                markers.push((plain.len(), pt, true));
                i += 1;
            }
            _ => {
                plain.push(stmts[i].clone());
                i += 1;
            }
        }
    }
    close_plain(&mut segments, &mut plain, &mut markers, true);
    if let Some(last) = segments.last_mut() {
        last.segment.barrier_after = true;
    }
    for (id, seg) in segments.iter_mut().enumerate() {
        seg.segment.id = id;
        seg.segment.region_id = region_ordinal;
    }

    let _ = f;
    Ok(RegionAnalysis {
        function: f.name.clone(),
        region_ordinal,
        n_threads,
        reentrant: any_reentrant,
        num_threads_expr: region
            .num_threads
            .as_ref()
            .map(|e| crate::frontend::printer::expr(&e.node)),
        segments,
    })
}

fn reconstruct_loop(
    ast: &Ast,
    stmts: &[Sp<Stmt>],
    args: &[Sp<Expr>],
    env: &ConstEnv,
    machine: &MachineConfig,
    segment_id: usize,
) -> Result<(SegmentAnalysis, usize, bool), SimError> {
    let bad = |msg: &str| SimError::Frontend(format!("transformed loop: {msg}"));
    if args.len() != 3 {
        return Err(bad("initialize expects (ordinal, n_itrs, chunk)"));
    }
    let ordinal = fold::fold_int_env(&args[0].node, env)
        .ok_or_else(|| bad("non-constant loop ordinal"))? as usize;
    let chunk = fold::fold_int_env(&args[2].node, env).ok_or_else(|| bad("non-constant chunk"))?;
    let n_itrs = match fold::fold_int_env(&args[1].node, env) {
        Some(n) => NItrs::Const(n),
        None => NItrs::Symbolic(crate::frontend::printer::expr(&args[1].node)),
    };

    let mut at = 1usize;
    if !matches!(stmts.get(at).map(|s| &s.node), Some(Stmt::Barrier)) {
        return Err(bad("missing barrier after initialize"));
    }
    at += 1;
    let Some(Stmt::While { cond, body }) = stmts.get(at).map(|s| &s.node) else {
        return Err(bad("missing consumption loop"));
    };
    let (var, fixed_size) = consumption_head(cond).ok_or_else(|| bad("unrecognized loop head"))?;
    at += 1;

    let mut barrier_after = false;
    if matches!(stmts.get(at).map(|s| &s.node), Some(Stmt::Barrier)) {
        barrier_after = true;
        at += 1;
    }
    let mut reentrant = false;
    if let Some(Stmt::Call { name, .. }) = stmts.get(at).map(|s| &s.node) {
        if name.starts_with("update_scaledend_") {
            reentrant = true;
            at += 1;
        }
    }

    // strip the optional index remap `v = L + v * S;`
    let mut loop_body = body.clone();
    let mut init = Sp::new(Expr::IntLit(0), Span::default());
    let mut step = Sp::new(Expr::IntLit(1), Span::default());
    if let Some(Sp {
        node: Stmt::Assign(a),
        ..
    }) = loop_body.stmts.first()
    {
        if a.target == LValue::Var(var.clone()) {
            if let Expr::Binary {
                op: BinOp::Add,
                lhs,
                rhs,
            } = &a.value.node
            {
                if let Expr::Binary {
                    op: BinOp::Mul,
                    lhs: mul_lhs,
                    rhs: mul_rhs,
                } = &rhs.node
                {
                    if mul_lhs.node == Expr::Var(var.clone()) {
                        init = (**lhs).clone();
                        step = (**mul_rhs).clone();
                        loop_body.stmts.remove(0);
                    }
                }
            }
        }
    }

    // fractions from the scaledend_<ordinal> global initializer
    let scaledend_name = format!("scaledend_{ordinal}");
    let fractions: Vec<f64> = ast
        .globals
        .iter()
        .find(|g| g.node.name == scaledend_name)
        .map(|g| {
            g.node
                .init_list
                .iter()
                .filter_map(|e| match e.node {
                    Expr::FloatLit(v) => Some(v),
                    Expr::IntLit(v) => Some(v as f64),
                    _ => None,
                })
                .collect()
        })
        .unwrap_or_default();
    if fractions.is_empty() {
        return Err(bad("missing scaledend initializer"));
    }

    let bound = match &n_itrs {
        NItrs::Const(n) => Sp::new(Expr::IntLit(*n), Span::default()),
        NItrs::Symbolic(_) => args[1].clone(),
    };
    let loop_ = ForLoop {
        var,
        init,
        bound,
        step,
        body: loop_body,
    };
    let per_iter = per_iteration_counts(&loop_, env);
    let counts = match &n_itrs {
        NItrs::Const(n) => per_iter.scale(*n as u64),
        NItrs::Symbolic(_) => {
            let mut c = per_iter.clone();
            c.unknown = true;
            c
        }
    };
    let of = OmpFor {
        schedule: None,
        nowait: !barrier_after,
        loop_,
    };
    let seg = SegmentAnalysis {
        estimate: estimate_both(&counts, &machine.calibration),
        counts,
        plan: SegmentPlan::For(LoopPlan {
            division: IterationDivision {
                scaledend: fractions,
                symbolic: match &n_itrs {
                    NItrs::Symbolic(e) => Some(e.clone()),
                    NItrs::Const(_) => None,
                },
            },
            chunk,
            fixed_size,
            reentrant,
            n_itrs,
            per_iter,
        }),
        loop_ordinal: Some(ordinal),
        segment: ParallelSegment {
            id: segment_id,
            kind: SegmentKind::WorksharingFor,
            body: Block::new(vec![Sp::new(Stmt::OmpFor(of), Span::default())]),
            region_id: 0,
            barrier_after,
        },
    };
    Ok((seg, at, reentrant))
}

/// `while ((v = doitr(tid)) != -1)` -> (v, fixed_size)
fn consumption_head(cond: &Sp<Expr>) -> Option<(String, bool)> {
    let Expr::Binary {
        op: BinOp::Ne, lhs, ..
    } = &cond.node
    else {
        return None;
    };
    let Expr::Assign { target, value } = &lhs.node else {
        return None;
    };
    let LValue::Var(var) = target.as_ref() else {
        return None;
    };
    let Expr::Call { name, .. } = &value.node else {
        return None;
    };
    match name.as_str() {
        "doitr" => Some((var.clone(), false)),
        "doitr_nosteal" => Some((var.clone(), true)),
        _ => None,
    }
}

fn reconstruct_sections(
    of: &OmpFor,
    n_threads: usize,
    env: &ConstEnv,
    machine: &MachineConfig,
    segment_id: usize,
) -> Result<SegmentAnalysis, SimError> {
    let bad = |msg: &str| SimError::Frontend(format!("transformed sections: {msg}"));
    let mut dispatch: Vec<(i64, Block)> = Vec::new();
    for s in &of.loop_.body.stmts {
        let Stmt::If {
            cond, then_body, ..
        } = &s.node
        else {
            return Err(bad("dispatch body must be an if-chain"));
        };
        let Expr::Binary {
            op: BinOp::Eq, rhs, ..
        } = &cond.node
        else {
            return Err(bad("dispatch condition must compare the index"));
        };
        let Expr::IntLit(k) = rhs.node else {
            return Err(bad("dispatch index must be a literal"));
        };
        dispatch.push((k, then_body.clone()));
    }
    dispatch.sort_by_key(|(k, _)| *k);

    let sections: Vec<Block> = dispatch.iter().map(|(_, b)| b.clone()).collect();
    let assignment: Vec<usize> = dispatch
        .iter()
        .map(|(k, _)| (*k as usize) % n_threads)
        .collect();
    let mut per_thread = vec![0usize; n_threads];
    for &t in &assignment {
        per_thread[t] += 1;
    }
    let calib = &machine.calibration;
    let affinity: Vec<f64> = sections
        .iter()
        .map(|b| {
            let c = count_block(b, env);
            let e = estimate_both(&c, calib);
            if e.big.total() > 0.0 {
                e.little.total() / e.big.total()
            } else {
                1.0
            }
        })
        .collect();

    let mut counts = OpCounts::default();
    for b in &sections {
        counts.add(&count_block(b, env));
    }
    let ss = OmpSections {
        sections,
        nowait: of.nowait,
    };
    Ok(SegmentAnalysis {
        estimate: estimate_both(&counts, calib),
        counts,
        plan: SegmentPlan::Sections(SectionAssignment {
            assignment,
            affinity,
            neutral_ratio: crate::scheduler::sections::neutral_ratio(calib),
            n_threads,
            max_per_thread: per_thread.iter().copied().max().unwrap_or(0),
            wl_im_trace: Vec::new(),
        }),
        loop_ordinal: None,
        segment: ParallelSegment {
            id: segment_id,
            kind: SegmentKind::WorksharingSections,
            body: Block::new(vec![Sp::new(Stmt::OmpSections(ss), Span::default())]),
            region_id: 0,
            barrier_after: !of.nowait,
        },
    })
}

fn is_call_to(cond: &Sp<Expr>, name: &str) -> bool {
    matches!(&cond.node, Expr::Call { name: n, .. } if n == name)
}

/// `{ mg[tid] = pt; }` under an atomic write.
fn publish_pt(body: &Block) -> Option<usize> {
    if body.stmts.len() != 1 {
        return None;
    }
    let Stmt::AtomicWrite(a) = &body.stmts[0].node else {
        return None;
    };
    match (&a.target, &a.value.node) {
        (LValue::Index { array, .. }, Expr::IntLit(pt)) if array == "mg" => Some(*pt as usize),
        _ => None,
    }
}

/// `{ mgi = 0; while (mgi < T) { if (mg[mgi] >= pt && inbig(mgi)) {...} ... } }`
fn scan_pt(body: &Block) -> Option<usize> {
    for s in &body.stmts {
        if let Stmt::While { body: wb, .. } = &s.node {
            for inner in &wb.stmts {
                if let Stmt::If { cond, .. } = &inner.node {
                    if let Expr::Binary {
                        op: BinOp::And,
                        lhs,
                        ..
                    } = &cond.node
                    {
                        if let Expr::Binary {
                            op: BinOp::Ge, rhs, ..
                        } = &lhs.node
                        {
                            if let Expr::IntLit(pt) = rhs.node {
                                return Some(pt as usize);
                            }
                        }
                    }
                }
            }
        }
    }
    None
}

/// Rebuild migration pairs from marker positions, recomputing the exchange
/// cost from live variables at each point.
fn pair_markers(
    markers: Vec<(usize, usize, bool)>,
    body: &Block,
    calib: &crate::workload::CalibrationTable,
) -> Vec<MigrationPair> {
    if markers.is_empty() {
        return Vec::new();
    }
    let mut live_out = BTreeSet::new();
    for s in &body.stmts {
        // conservative: anything the block itself uses stays live at its end
        live_out.extend(gen_uses(&s.node));
    }
    let live = live_at_boundaries(&body.stmts, &live_out);
    let mut pairs: Vec<MigrationPair> = Vec::new();
    for &(boundary, pt, is_mp) in &markers {
        if is_mp {
            pairs.push(MigrationPair {
                mp: boundary,
                mgp: boundary,
                pt,
                c_ex_s: calib.migration_base_cost_s
                    + calib.live_var_cost_s * live[boundary.min(live.len() - 1)].len() as f64,
                live_at_mp: live[boundary.min(live.len() - 1)].len(),
                live_at_mgp: 0,
            });
        }
    }
    for &(boundary, pt, is_mp) in &markers {
        if !is_mp {
            if let Some(pair) = pairs.iter_mut().find(|p| p.pt == pt) {
                pair.mgp = boundary;
                pair.live_at_mgp = live[boundary.min(live.len() - 1)].len();
            }
        }
    }
    pairs.sort_by_key(|p| p.mp);
    pairs
}

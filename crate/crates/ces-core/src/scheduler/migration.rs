//! Migration-point placement for plain-block segments.
//!
//! All threads of a team execute a plain block symmetrically, so the only
//! imbalance is the core asymmetry itself. A LITTLE-hosted thread (attacker)
//! can swap cores with a big-hosted thread (victim) at a migration point
//! `mp`, provided the victim has passed the paired minimum-guarantee point
//! `mgp`. Candidate points are the block's interior statement boundaries;
//! the exchange cost at a point is the fixed migration cost plus a per-live-
//! variable charge.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::*;
use crate::workload::{count_stmt, estimate, CalibrationTable, ConstEnv, CoreType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationPair {
    /// Migration point: boundary index before statement `mp` (1-based
    /// interior boundary).
    pub mp: usize,
    /// Minimum-guarantee point: boundary the victim must have passed.
    pub mgp: usize,
    /// Point id published/tested in the emitted code (1-based, program
    /// order of mp).
    pub pt: usize,
    pub c_ex_s: f64,
    pub live_at_mp: usize,
    pub live_at_mgp: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MigrationPlan {
    pub pairs: Vec<MigrationPair>,
    /// Estimated wl_im without any exchange, for reporting.
    pub baseline_im_s: f64,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Place up to `max(1, n_little / n_big)` migration-point pairs on a plain
/// block. A pair is kept only when the statically estimated wl_im reduction
/// exceeds its exchange cost.
pub fn place_migration_points(
    block: &Block,
    live_out: &BTreeSet<String>,
    cores: &[CoreType],
    calib: &CalibrationTable,
    env: &ConstEnv,
) -> MigrationPlan {
    let n_big = cores.iter().filter(|&&c| c == CoreType::Big).count();
    let n_little = cores.len() - n_big;
    let len = block.stmts.len();

    // prefix times per boundary 0..=len on both core types
    let mut pre_b = vec![0.0f64; len + 1];
    let mut pre_l = vec![0.0f64; len + 1];
    for (i, s) in block.stmts.iter().enumerate() {
        let c = count_stmt(&s.node, env);
        pre_b[i + 1] = pre_b[i] + estimate(&c, CoreType::Big, calib).total();
        pre_l[i + 1] = pre_l[i] + estimate(&c, CoreType::Little, calib).total();
    }
    let total_b = pre_b[len];
    let total_l = pre_l[len];
    let baseline_im = (total_l - total_b).abs();

    let mut plan = MigrationPlan {
        pairs: Vec::new(),
        baseline_im_s: baseline_im,
    };
    if n_big == 0 || n_little == 0 || len < 2 {
        return plan;
    }
    let wanted = (n_little / n_big).max(1);
    let live = live_at_boundaries(&block.stmts, live_out);

    struct Candidate {
        mp: usize,
        mgp: usize,
        c_ex: f64,
        live_mp: usize,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for mp in 1..len {
        let c_ex = calib.migration_base_cost_s + calib.live_var_cost_s * live[mp].len() as f64;
        let t_arrive = pre_l[mp];
        // earliest guarantee point: victim's remaining code on LITTLE must
        // not exceed the attacker's remaining code on big
        let attacker_suffix_b = total_b - pre_b[mp];
        let mgp = match (1..len).find(|&q| total_l - pre_l[q] <= attacker_suffix_b) {
            Some(q) => q,
            None => continue,
        };
        // victim progress when the attacker arrives
        let victim_pos = (0..=len).rev().find(|&q| pre_b[q] <= t_arrive).unwrap_or(0);
        if victim_pos < mgp {
            continue; // the exchange would not trigger at mp
        }
        let swaps = n_big.min(n_little);
        let attacker_new = t_arrive + c_ex + (total_b - pre_b[mp]);
        let victim_new = t_arrive + c_ex + (total_l - pre_l[victim_pos]);
        let mut wl = Vec::new();
        wl.extend(std::iter::repeat_n(attacker_new, swaps));
        wl.extend(std::iter::repeat_n(victim_new, swaps));
        wl.extend(std::iter::repeat_n(total_b, n_big - swaps));
        wl.extend(std::iter::repeat_n(total_l, n_little - swaps));
        let new_im = crate::workload::imbalance(&wl).0;
        let reduction = baseline_im - new_im;
        if reduction > c_ex {
            candidates.push(Candidate {
                mp,
                mgp,
                c_ex,
                live_mp: live[mp].len(),
            });
        }
    }

    candidates.sort_by(|a, b| a.c_ex.partial_cmp(&b.c_ex).unwrap().then(a.mp.cmp(&b.mp)));
    let mut chosen: Vec<Candidate> = Vec::new();
    for c in candidates {
        if chosen.len() == wanted {
            break;
        }
        if chosen.iter().all(|p| p.mp != c.mp) {
            chosen.push(c);
        }
    }
    chosen.sort_by_key(|c| c.mp);
    plan.pairs = chosen
        .into_iter()
        .enumerate()
        .map(|(i, c)| MigrationPair {
            mp: c.mp,
            mgp: c.mgp,
            pt: i + 1,
            c_ex_s: c.c_ex,
            live_at_mp: c.live_mp,
            live_at_mgp: live[c.mgp].len(),
        })
        .collect();
    plan
}

// ---- name-granularity liveness ----------------------------------------

/// Live variable names at each boundary `0..=len` of a statement list.
/// Boundary `i` is the point just before statement `i`.
pub fn live_at_boundaries(
    stmts: &[Sp<Stmt>],
    live_out: &BTreeSet<String>,
) -> Vec<BTreeSet<String>> {
    let mut out = vec![BTreeSet::new(); stmts.len() + 1];
    let mut live = live_out.clone();
    out[stmts.len()] = live.clone();
    for (i, s) in stmts.iter().enumerate().rev() {
        live = live_in(&s.node, &live);
        out[i] = live.clone();
    }
    out
}

fn live_in(s: &Stmt, after: &BTreeSet<String>) -> BTreeSet<String> {
    let mut live = after.clone();
    for k in definite_kills(s) {
        live.remove(&k);
    }
    live.extend(gen_uses(s));
    live
}

/// Scalars this statement assigns on every execution. Writing an array
/// element never kills the array name.
fn definite_kills(s: &Stmt) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    match s {
        Stmt::Assign(a) | Stmt::AtomicWrite(a) => {
            if let LValue::Var(n) = &a.target {
                out.insert(n.clone());
            }
        }
        Stmt::Decl(d) => {
            out.insert(d.name.clone());
        }
        Stmt::For(f) => {
            out.insert(f.var.clone());
            // a counted loop with a provably positive trip count executes
            // its body at least once
            if matches!(crate::workload::fold::trip_count(f, &ConstEnv::empty()), Some(t) if t >= 1)
            {
                for inner in &f.body.stmts {
                    out.extend(definite_kills(&inner.node));
                }
            }
        }
        _ => {}
    }
    out
}

/// Names read by this statement before any local kill can be relied on
/// (over-approximate for nested control flow, except the loop variable of a
/// canonical loop, which its init always defines first).
pub(crate) fn gen_uses(s: &Stmt) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    match s {
        Stmt::Assign(a) | Stmt::AtomicWrite(a) => {
            expr_uses(&a.value.node, &mut out);
            if let LValue::Index { array, index } = &a.target {
                out.insert(array.clone());
                expr_uses(&index.node, &mut out);
            }
        }
        Stmt::Decl(d) => {
            if let Some(i) = &d.init {
                expr_uses(&i.node, &mut out);
            }
            for e in &d.init_list {
                expr_uses(&e.node, &mut out);
            }
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
        } => {
            expr_uses(&cond.node, &mut out);
            for b in then_body
                .stmts
                .iter()
                .chain(else_body.iter().flat_map(|b| b.stmts.iter()))
            {
                out.extend(gen_uses(&b.node));
            }
        }
        Stmt::For(f) => {
            expr_uses(&f.init.node, &mut out);
            let mut inner = BTreeSet::new();
            expr_uses(&f.bound.node, &mut inner);
            expr_uses(&f.step.node, &mut inner);
            for b in &f.body.stmts {
                inner.extend(gen_uses(&b.node));
            }
            inner.remove(&f.var);
            out.extend(inner);
        }
        Stmt::While { cond, body } | Stmt::DoWhile { body, cond } => {
            expr_uses(&cond.node, &mut out);
            for b in &body.stmts {
                out.extend(gen_uses(&b.node));
            }
        }
        Stmt::Call { args, .. } => {
            for a in args {
                expr_uses(&a.node, &mut out);
            }
        }
        Stmt::Parallel(r) => {
            for b in &r.body.stmts {
                out.extend(gen_uses(&b.node));
            }
        }
        Stmt::OmpFor(of) => {
            expr_uses(&of.loop_.init.node, &mut out);
            expr_uses(&of.loop_.bound.node, &mut out);
            for b in &of.loop_.body.stmts {
                out.extend(gen_uses(&b.node));
            }
            out.remove(&of.loop_.var);
        }
        Stmt::OmpSections(ss) => {
            for sec in &ss.sections {
                for b in &sec.stmts {
                    out.extend(gen_uses(&b.node));
                }
            }
        }
        Stmt::OmpSingle { body } => {
            for b in &body.stmts {
                out.extend(gen_uses(&b.node));
            }
        }
        Stmt::Break | Stmt::Barrier => {}
    }
    out
}

pub(crate) fn expr_uses(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(n) => {
            out.insert(n.clone());
        }
        Expr::Index { array, index } => {
            out.insert(array.clone());
            expr_uses(&index.node, out);
        }
        Expr::Unary { operand, .. } => expr_uses(&operand.node, out),
        Expr::Binary { lhs, rhs, .. } => {
            expr_uses(&lhs.node, out);
            expr_uses(&rhs.node, out);
        }
        Expr::Call { args, .. } => {
            for a in args {
                expr_uses(&a.node, out);
            }
        }
        Expr::Assign { target, value } => {
            if let LValue::Index { array, index } = target.as_ref() {
                out.insert(array.clone());
                expr_uses(&index.node, out);
            }
            expr_uses(&value.node, out);
        }
        Expr::IntLit(_) | Expr::FloatLit(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, SourceProgram};

    fn block_of(body: &str) -> Block {
        let src = format!("void main() {{\n{body}\n}}");
        let ast = parse(&SourceProgram::new("t.comp.c", &src)).expect("fixture parses");
        ast.functions[0].body.clone()
    }

    /// Four heavy statements whose interior boundaries carry 5, 2 and 7 live
    /// variables; the point with 2 has the lowest exchange cost.
    fn fixture_block() -> Block {
        block_of(
            "int k3; int k2; int k; int e1; int e2; int e3; int e4; int e5;\n\
             int w; int m; int p; int q; int r; int u; int v; int z;\n\
             #pragma omp parallel\n{\n\
             for (k3 = 0; k3 < 60000; k3++) { e1 = k3 * 3; e2 = k3 * 3; e3 = k3 * 3; e4 = k3 * 3; e5 = k3 * 3; }\n\
             for (k2 = 0; k2 < 60000; k2++) { w = k2 + e1 + e2; m = e3 + e4 + e5; }\n\
             for (k = 0; k < 60000; k++) { p = k * 2; q = k * 2; r = k * 2; u = k * 2; v = k * 2; }\n\
             z = p + q + r + u + v + w + m;\n\
             }\n",
        )
    }

    /// Five identical heavy statements plus a tail that keeps one value from
    /// each alive; several interior boundaries are feasible exchange points.
    fn long_block() -> Block {
        let mut body = String::new();
        for i in 1..=5 {
            body.push_str(&format!(
                "int k{i}; int v{i}1; int v{i}2; int v{i}3; int v{i}4; int v{i}5;\n"
            ));
        }
        body.push_str("int z;\n#pragma omp parallel\n{\n");
        for i in 1..=5 {
            body.push_str(&format!(
                "for (k{i} = 0; k{i} < 60000; k{i}++) {{ v{i}1 = k{i} * 3; v{i}2 = k{i} * 3; v{i}3 = k{i} * 3; v{i}4 = k{i} * 3; v{i}5 = k{i} * 3; }}\n"
            ));
        }
        body.push_str("z = v11 + v21 + v31 + v41 + v51;\n}\n");
        block_of(&body)
    }

    fn region_stmts(b: &Block) -> Block {
        for s in &b.stmts {
            if let Stmt::Parallel(r) = &s.node {
                return r.body.clone();
            }
        }
        panic!("fixture has a parallel region");
    }

    #[test]
    fn live_counts_match_hand_analysis() {
        let region = region_stmts(&fixture_block());
        let live = live_at_boundaries(&region.stmts, &BTreeSet::new());
        let sizes: Vec<usize> = live[1..4].iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![5, 2, 7]);
    }

    #[test]
    fn mp_lands_on_the_cheapest_boundary() {
        let region = region_stmts(&fixture_block());
        let plan = place_migration_points(
            &region,
            &BTreeSet::new(),
            &[CoreType::Big, CoreType::Little],
            &CalibrationTable::default(),
            &ConstEnv::empty(),
        );
        assert_eq!(plan.pairs.len(), 1);
        assert_eq!(plan.pairs[0].mp, 2, "boundary with 2 live vars");
        assert_eq!(plan.pairs[0].live_at_mp, 2);
        assert!(plan.pairs[0].mgp > plan.pairs[0].mp);
    }

    #[test]
    fn balanced_block_gets_no_pairs() {
        // on a machine with identical core types the estimates are equal
        // everywhere, so no exchange can reduce wl_im
        let region = region_stmts(&fixture_block());
        let mut calib = CalibrationTable::default();
        calib.little = calib.big.clone();
        let plan = place_migration_points(
            &region,
            &BTreeSet::new(),
            &[CoreType::Big, CoreType::Little],
            &calib,
            &ConstEnv::empty(),
        );
        assert!(plan.is_empty());
    }

    #[test]
    fn little_heavy_machine_gets_multiple_pairs() {
        let region = region_stmts(&long_block());
        let plan = place_migration_points(
            &region,
            &BTreeSet::new(),
            &[
                CoreType::Big,
                CoreType::Big,
                CoreType::Little,
                CoreType::Little,
                CoreType::Little,
                CoreType::Little,
            ],
            &CalibrationTable::default(),
            &ConstEnv::empty(),
        );
        assert_eq!(plan.pairs.len(), 2, "4 LITTLE / 2 big wants two pairs");
        assert_eq!(plan.pairs[0].pt, 1);
        assert_eq!(plan.pairs[1].pt, 2);
        assert!(
            plan.pairs[0].mp < plan.pairs[1].mp,
            "pairs sorted by program order"
        );
    }

    #[test]
    fn pair_requires_reduction_to_beat_exchange_cost() {
        // enormous exchange cost suppresses every candidate
        let region = region_stmts(&fixture_block());
        let calib = CalibrationTable {
            migration_base_cost_s: 1e6,
            ..CalibrationTable::default()
        };
        let plan = place_migration_points(
            &region,
            &BTreeSet::new(),
            &[CoreType::Big, CoreType::Little],
            &calib,
            &ConstEnv::empty(),
        );
        assert!(plan.is_empty());
    }
}

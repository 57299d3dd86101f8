//! Static operation counting and the performance-estimation model.
//!
//! Counting rules (fixed for the whole toolkit):
//!
//! * every binary operator (arithmetic, comparison, bitwise, logical) is one
//!   ALU op; unary operators are free
//! * every array-element read or write is one memory op; scalar accesses are
//!   register-resident and free
//! * every `if` and every counted-loop back-edge is one branch; a counted
//!   `for` loop's own condition/step bookkeeping is absorbed into that
//!   back-edge, not double counted as ALU work
//! * an `if` condition costs at least one ALU op (the compare), and the arms
//!   contribute the component-wise maximum over both paths
//! * counted loops with constant trip count multiply their body counts;
//!   `while`/`do-while`, recursion and un-inlined calls are unknown and
//!   estimate at the configured ceiling
//!
//! The time estimate of a fragment on core type `ct` is
//! `total(ct) = p_op(ct) + p_mem(ct)`, where `p_op` covers ALU work and
//! `p_mem` covers memory traffic plus expected branch-miss stalls.

pub mod calib;
pub mod fold;

use serde::{Deserialize, Serialize};

pub use calib::{CalibrationTable, CoreCalib, CoreType};
pub use fold::ConstEnv;

use crate::frontend::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub alu: u64,
    pub mem: u64,
    pub branch: u64,
    /// A non-deterministic construct (while/do-while, recursion, opaque
    /// call) is inside; estimates saturate at the unknown-cost ceiling.
    pub unknown: bool,
    /// Loop-bound expression multiplier when a trip count is only known at
    /// run time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic_factor: Option<String>,
}

impl OpCounts {
    pub fn new(alu: u64, mem: u64, branch: u64) -> Self {
        OpCounts {
            alu,
            mem,
            branch,
            unknown: false,
            symbolic_factor: None,
        }
    }

    pub fn unknown() -> Self {
        OpCounts {
            unknown: true,
            ..OpCounts::default()
        }
    }

    pub fn add(&mut self, other: &OpCounts) {
        self.alu = self.alu.saturating_add(other.alu);
        self.mem = self.mem.saturating_add(other.mem);
        self.branch = self.branch.saturating_add(other.branch);
        self.unknown |= other.unknown;
        if self.symbolic_factor.is_none() {
            self.symbolic_factor = other.symbolic_factor.clone();
        }
    }

    pub fn scale(&self, factor: u64) -> OpCounts {
        OpCounts {
            alu: self.alu.saturating_mul(factor),
            mem: self.mem.saturating_mul(factor),
            branch: self.branch.saturating_mul(factor),
            unknown: self.unknown,
            symbolic_factor: self.symbolic_factor.clone(),
        }
    }

    /// Component-wise maximum: the conservative join over branch paths.
    pub fn path_max(&self, other: &OpCounts) -> OpCounts {
        OpCounts {
            alu: self.alu.max(other.alu),
            mem: self.mem.max(other.mem),
            branch: self.branch.max(other.branch),
            unknown: self.unknown || other.unknown,
            symbolic_factor: self
                .symbolic_factor
                .clone()
                .or_else(|| other.symbolic_factor.clone()),
        }
    }
}

pub fn count_block(b: &Block, env: &ConstEnv) -> OpCounts {
    let mut total = OpCounts::default();
    for s in &b.stmts {
        total.add(&count_stmt(&s.node, env));
    }
    total
}

pub fn count_stmt(s: &Stmt, env: &ConstEnv) -> OpCounts {
    match s {
        Stmt::Decl(d) => {
            let mut c = OpCounts::default();
            if let Some(init) = &d.init {
                c.add(&count_expr(&init.node));
            }
            for e in &d.init_list {
                c.add(&count_expr(&e.node));
                c.mem += 1;
            }
            c
        }
        Stmt::Assign(a) | Stmt::AtomicWrite(a) => count_assign(a),
        Stmt::If {
            cond,
            then_body,
            else_body,
        } => {
            let mut c = count_cond(cond);
            c.branch += 1;
            let then_c = count_block(then_body, env);
            let else_c = else_body
                .as_ref()
                .map(|e| count_block(e, env))
                .unwrap_or_default();
            c.add(&then_c.path_max(&else_c));
            c
        }
        Stmt::For(lp) => count_for(lp, env),
        Stmt::While { cond, body } | Stmt::DoWhile { body, cond } => {
            let mut c = count_cond(cond);
            c.add(&count_block(body, env));
            c.unknown = true;
            c
        }
        Stmt::Call { args, .. } => {
            // post-inline residue: recursive or undefined callee
            let mut c = OpCounts::unknown();
            for a in args {
                c.add(&count_expr(&a.node));
            }
            c
        }
        Stmt::Break => OpCounts::default(),
        // work-sharing constructs and barriers are segment boundaries, not
        // countable statements; seeing one here means the caller handed us
        // the wrong fragment
        Stmt::Barrier
        | Stmt::Parallel(_)
        | Stmt::OmpFor(_)
        | Stmt::OmpSections(_)
        | Stmt::OmpSingle { .. } => OpCounts::unknown(),
    }
}

fn count_for(lp: &ForLoop, env: &ConstEnv) -> OpCounts {
    let mut per_iter = count_block(&lp.body, env);
    per_iter.branch += 1; // back-edge
    let mut c = count_expr(&lp.init.node);
    match fold::trip_count(lp, env) {
        Some(t) => {
            c.add(&per_iter.scale(t as u64));
            c
        }
        None => {
            c.add(&per_iter);
            c.unknown = true;
            c.symbolic_factor = Some(crate::frontend::printer::expr(&fold::n_itrs_expr(lp)));
            c
        }
    }
}

fn count_assign(a: &Assign) -> OpCounts {
    let mut c = count_expr(&a.value.node);
    if let LValue::Index { index, .. } = &a.target {
        c.mem += 1;
        c.add(&count_expr(&index.node));
    }
    c
}

/// Condition of an `if`/`while`: at least one ALU op for the compare itself.
pub fn count_cond(e: &Sp<Expr>) -> OpCounts {
    let mut c = count_expr(&e.node);
    c.alu = c.alu.max(1);
    c
}

pub fn count_expr(e: &Expr) -> OpCounts {
    match e {
        Expr::IntLit(_) | Expr::FloatLit(_) | Expr::Var(_) => OpCounts::default(),
        Expr::Index { index, .. } => {
            let mut c = count_expr(&index.node);
            c.mem += 1;
            c
        }
        Expr::Unary { operand, .. } => count_expr(&operand.node),
        Expr::Binary { lhs, rhs, .. } => {
            let mut c = OpCounts::new(1, 0, 0);
            c.add(&count_expr(&lhs.node));
            c.add(&count_expr(&rhs.node));
            c
        }
        Expr::Call { args, .. } => {
            let mut c = OpCounts::unknown();
            for a in args {
                c.add(&count_expr(&a.node));
            }
            c
        }
        Expr::Assign { target, value } => {
            let mut c = count_expr(&value.node);
            if let LValue::Index { index, .. } = target.as_ref() {
                c.mem += 1;
                c.add(&count_expr(&index.node));
            }
            c
        }
    }
}

/// Per-iteration counts of an `omp for` loop: the body plus the back-edge.
pub fn per_iteration_counts(lp: &ForLoop, env: &ConstEnv) -> OpCounts {
    let mut c = count_block(&lp.body, env);
    c.branch += 1;
    c
}

// ---- estimation --------------------------------------------------------

/// Estimated seconds on one core type, split into the two model terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreEstimate {
    pub p_op: f64,
    pub p_mem: f64,
}

impl CoreEstimate {
    pub fn total(&self) -> f64 {
        self.p_op + self.p_mem
    }
}

/// Estimates for both core types; `total(ct)` is a thread's workload when it
/// runs on a core of type `ct`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEstimate {
    pub big: CoreEstimate,
    pub little: CoreEstimate,
}

impl WorkloadEstimate {
    pub fn for_type(&self, ct: CoreType) -> CoreEstimate {
        match ct {
            CoreType::Big => self.big,
            CoreType::Little => self.little,
        }
    }

    pub fn total(&self, ct: CoreType) -> f64 {
        self.for_type(ct).total()
    }
}

pub fn estimate(counts: &OpCounts, ct: CoreType, calib: &CalibrationTable) -> CoreEstimate {
    let c = calib.for_type(ct);
    if counts.unknown {
        return CoreEstimate {
            p_op: calib.unknown_cost_alu * c.cycles_per_alu / c.frequency_hz,
            p_mem: 0.0,
        };
    }
    CoreEstimate {
        p_op: counts.alu as f64 * c.cycles_per_alu / c.frequency_hz,
        p_mem: (counts.mem as f64 * c.cycles_per_mem
            + counts.branch as f64 * c.branch_miss_rate * c.cycles_per_branch_miss)
            / c.frequency_hz,
    }
}

pub fn estimate_both(counts: &OpCounts, calib: &CalibrationTable) -> WorkloadEstimate {
    WorkloadEstimate {
        big: estimate(counts, CoreType::Big, calib),
        little: estimate(counts, CoreType::Little, calib),
    }
}

/// Workload imbalance: max pairwise |wl(i) - wl(j)|, i.e. max - min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlImbalance(pub f64);

pub fn imbalance(workloads: &[f64]) -> WlImbalance {
    if workloads.is_empty() {
        return WlImbalance(0.0);
    }
    let max = workloads.iter().cloned().fold(f64::MIN, f64::max);
    let min = workloads.iter().cloned().fold(f64::MAX, f64::min);
    WlImbalance(max - min)
}

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("thread {0} has no core assignment")]
    UnmappedThread(usize),
    #[error("thread {thread} mapped to core {core}, but the machine has {cores} cores")]
    CoreOutOfRange {
        thread: usize,
        core: usize,
        cores: usize,
    },
}

/// Per-thread workloads for one segment under a thread→core map, plus the
/// resulting imbalance.
pub fn thread_workloads(
    fragments: &[OpCounts],
    assignment: &[usize],
    core_types: &[CoreType],
    calib: &CalibrationTable,
) -> Result<(Vec<f64>, WlImbalance), WorkloadError> {
    let mut wl = Vec::with_capacity(fragments.len());
    for (t, counts) in fragments.iter().enumerate() {
        let core = *assignment.get(t).ok_or(WorkloadError::UnmappedThread(t))?;
        let ct = *core_types.get(core).ok_or(WorkloadError::CoreOutOfRange {
            thread: t,
            core,
            cores: core_types.len(),
        })?;
        wl.push(estimate(counts, ct, calib).total());
    }
    let im = imbalance(&wl);
    Ok((wl, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, SourceProgram};

    fn stmt_counts(body: &str) -> OpCounts {
        let src = format!("void main() {{\n{body}\n}}");
        let ast = parse(&SourceProgram::new("t.comp.c", src)).expect("fixture parses");
        count_block(&ast.functions[0].body, &ConstEnv::empty())
    }

    #[test]
    fn array_copy_with_add_counts_one_alu_two_mem() {
        // x[i] = y[i] + 3
        let c = stmt_counts("int i; int x[4]; int y[4]; x[i] = y[i] + 3;");
        assert_eq!(c, OpCounts::new(1, 2, 0));
    }

    #[test]
    fn if_takes_max_path_plus_compare_and_branch() {
        // then-arm has 10 ALU ops, else-arm 4; condition is a bare scalar
        let then_arm = "a = a + 1; a = a + 1; a = a + 1; a = a + 1; a = a + 1; a = a + 1; a = a + 1; a = a + 1; a = a + 1; a = a + 1;";
        let else_arm = "a = a + 1; a = a + 1; a = a + 1; a = a + 1;";
        let c = stmt_counts(&format!(
            "int a; int cnd; if (cnd) {{ {then_arm} }} else {{ {else_arm} }}"
        ));
        assert_eq!(c.alu, 11, "10 from the longer path plus one compare");
        assert_eq!(c.branch, 1);
        assert!(!c.unknown);
    }

    #[test]
    fn while_with_opaque_call_is_unknown() {
        let c = stmt_counts("int x; while (f(x)) { x = x + 1; }");
        assert!(c.unknown);
    }

    #[test]
    fn constant_loop_multiplies_body() {
        let c = stmt_counts("int i; int a[8]; for (i = 0; i < 8; i++) { a[i] = 3; }");
        assert_eq!(c.mem, 8);
        assert_eq!(c.branch, 8, "one back-edge per iteration");
        assert!(!c.unknown);
    }

    #[test]
    fn runtime_bound_loop_is_symbolic_and_unknown() {
        let c = stmt_counts("int i; int n; int a[8]; for (i = 0; i < n; i++) { a[i] = 3; }");
        assert!(c.unknown);
        assert_eq!(c.symbolic_factor.as_deref(), Some("n"));
    }

    #[test]
    fn frozen_constants_fold_trip_counts() {
        let src = "void main() {\n int i; int n = 16; int a[16];\n for (i = 0; i < n; i++) { a[i] = 0; }\n}";
        let ast = parse(&SourceProgram::new("t.comp.c", src)).unwrap();
        let env = ConstEnv::from_function(&ast, &ast.functions[0]);
        let c = count_block(&ast.functions[0].body, &env);
        assert!(!c.unknown);
        assert_eq!(c.mem, 16);
    }

    #[test]
    fn additivity_over_statements() {
        let a = stmt_counts("int x; int y[4]; x = y[0] + 1;");
        let b = stmt_counts("int x; int y[4]; y[1] = x * 2;");
        let both = stmt_counts("int x; int y[4]; x = y[0] + 1; y[1] = x * 2;");
        // declarations contribute nothing, so counts add exactly
        assert_eq!(both.alu, a.alu + b.alu);
        assert_eq!(both.mem, a.mem + b.mem);
        assert_eq!(both.branch, a.branch + b.branch);
    }

    #[test]
    fn pure_alu_ratio_little_over_big_is_fitted_to_2_5() {
        let calib = CalibrationTable::default();
        let counts = OpCounts::new(1000, 0, 0);
        let e = estimate_both(&counts, &calib);
        let ratio = e.little.total() / e.big.total();
        assert!((ratio - 2.5).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn zero_counts_estimate_to_zero() {
        let calib = CalibrationTable::default();
        let e = estimate_both(&OpCounts::default(), &calib);
        assert_eq!(e.big.total(), 0.0);
        assert_eq!(e.little.total(), 0.0);
    }

    #[test]
    fn big_is_never_slower_on_alu_and_mem_ratio_is_flatter() {
        let calib = CalibrationTable::default();
        let mixed = OpCounts::new(17, 5, 3);
        let e = estimate_both(&mixed, &calib);
        assert!(e.big.p_op < e.little.p_op);
        let op_ratio = e.big.p_op / e.little.p_op;
        let mem_ratio = e.big.p_mem / e.little.p_mem;
        assert!(
            mem_ratio > op_ratio,
            "memory path must be relatively better on LITTLE: {mem_ratio} vs {op_ratio}"
        );
    }

    #[test]
    fn pem_decomposition_is_exact() {
        let calib = CalibrationTable::default();
        let counts = OpCounts::new(123, 45, 6);
        for ct in [CoreType::Big, CoreType::Little] {
            let e = estimate(&counts, ct, &calib);
            assert_eq!(e.total(), e.p_op + e.p_mem);
        }
    }

    #[test]
    fn unknown_counts_hit_the_ceiling() {
        let calib = CalibrationTable::default();
        let e = estimate(&OpCounts::unknown(), CoreType::Big, &calib);
        let direct = estimate(&OpCounts::new(1_000_000, 0, 0), CoreType::Big, &calib);
        assert_eq!(e.total(), direct.total());
    }

    #[test]
    fn path_max_dominates_each_arm() {
        let calib = CalibrationTable::default();
        // arms skewed toward different op classes
        let then_c = OpCounts::new(10, 0, 0);
        let else_c = OpCounts::new(0, 9, 0);
        let joined = then_c.path_max(&else_c);
        for ct in [CoreType::Big, CoreType::Little] {
            let j = estimate(&joined, ct, &calib).total();
            assert!(j >= estimate(&then_c, ct, &calib).total());
            assert!(j >= estimate(&else_c, ct, &calib).total());
        }
    }

    #[test]
    fn figure2_static_split_gives_im_15() {
        // 25 iterations each on 2 big (speed 2.5) + 2 LITTLE (speed 1),
        // one unit of work per iteration
        let calib = figure2_calib();
        let frag = OpCounts::new(25, 0, 0);
        let fragments = vec![frag.clone(), frag.clone(), frag.clone(), frag];
        let (wl, im) = thread_workloads(
            &fragments,
            &[0, 1, 2, 3],
            &[
                CoreType::Big,
                CoreType::Big,
                CoreType::Little,
                CoreType::Little,
            ],
            &calib,
        )
        .unwrap();
        assert_eq!(wl, vec![10.0, 10.0, 25.0, 25.0]);
        assert!((im.0 - 15.0).abs() < 1e-12);
    }

    #[test]
    fn ces_split_gives_im_0_4() {
        let calib = figure2_calib();
        let fragments = vec![
            OpCounts::new(36, 0, 0),
            OpCounts::new(36, 0, 0),
            OpCounts::new(14, 0, 0),
            OpCounts::new(14, 0, 0),
        ];
        let (wl, im) = thread_workloads(
            &fragments,
            &[0, 1, 2, 3],
            &[
                CoreType::Big,
                CoreType::Big,
                CoreType::Little,
                CoreType::Little,
            ],
            &calib,
        )
        .unwrap();
        assert!((wl[0] - 14.4).abs() < 1e-12);
        assert!((im.0 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn identical_fragments_on_identical_cores_balance() {
        let calib = CalibrationTable::default();
        let frag = OpCounts::new(100, 20, 5);
        let fragments = vec![frag.clone(), frag.clone(), frag.clone(), frag];
        let (_, im) =
            thread_workloads(&fragments, &[0, 1, 2, 3], &[CoreType::Big; 4], &calib).unwrap();
        assert_eq!(im.0, 0.0);
    }

    #[test]
    fn unmapped_thread_is_an_error() {
        let calib = CalibrationTable::default();
        let fragments = vec![OpCounts::default(), OpCounts::default()];
        let err = thread_workloads(&fragments, &[0], &[CoreType::Big], &calib).unwrap_err();
        assert!(matches!(err, WorkloadError::UnmappedThread(1)));
    }

    /// Abstract figure-2 machine: big runs one ALU op per 0.4 s, LITTLE per
    /// 1 s, no branch misses, zero overheads.
    pub(crate) fn figure2_calib() -> CalibrationTable {
        CalibrationTable {
            big: CoreCalib {
                cycles_per_alu: 1.0,
                cycles_per_mem: 1.0,
                cycles_per_branch_miss: 1.0,
                branch_miss_rate: 0.0,
                frequency_hz: 2.5,
                active_power_w: 1.5,
                idle_power_w: 0.05,
            },
            little: CoreCalib {
                cycles_per_alu: 1.0,
                cycles_per_mem: 1.0,
                cycles_per_branch_miss: 1.0,
                branch_miss_rate: 0.0,
                frequency_hz: 1.0,
                active_power_w: 0.4,
                idle_power_w: 0.02,
            },
            steal_cost_s: 0.0,
            migration_base_cost_s: 0.0,
            live_var_cost_s: 0.0,
            unknown_cost_alu: 1e6,
            fixed_size_factor: 0.1,
            chunk_factor: 1.0,
        }
    }
}

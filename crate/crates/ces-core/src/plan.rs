//! The analysis phase: walk every parallel region, partition it into
//! segments, and decide a plan for each — iteration division, loop chunk and
//! fixed-size flag, section assignment, migration pairs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::*;
use crate::frontend::{inline_functions, partition_segments, ParallelSegment, SegmentKind};
use crate::machine::MachineConfig;
use crate::scheduler::{
    classify_fixed_size, compute_chunk, divide_iterations, migration, place_migration_points,
    schedule_sections, IterationDivision, LoopPlan, MigrationPlan, NItrs, SchedulerError,
    SectionAssignment,
};
use crate::workload::{
    count_block, estimate_both, fold, per_iteration_counts, ConstEnv, CoreType, OpCounts,
    WorkloadEstimate,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error("num_threads must be a compile-time constant expression")]
    NonConstThreads,
    #[error("num_threads {requested} exceeds the machine's {cores} cores")]
    TooManyThreads { requested: i64, cores: usize },
    #[error("num_threads must be at least 1, got {0}")]
    BadThreads(i64),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentPlan {
    For(LoopPlan),
    Sections(SectionAssignment),
    Single(SectionAssignment),
    Block(MigrationPlan),
}

#[derive(Debug, Clone)]
pub struct SegmentAnalysis {
    pub segment: ParallelSegment,
    /// Whole-segment operation counts (per-iteration counts scaled for
    /// loops).
    pub counts: OpCounts,
    pub estimate: WorkloadEstimate,
    pub plan: SegmentPlan,
    /// 1-based program-wide ordinal of `omp for` segments; names the
    /// `scaledend_<i>` array.
    pub loop_ordinal: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RegionAnalysis {
    pub function: String,
    /// Program-wide region ordinal, program order.
    pub region_ordinal: usize,
    pub n_threads: usize,
    /// The region executes more than once (it sits under an enclosing
    /// loop).
    pub reentrant: bool,
    pub num_threads_expr: Option<String>,
    pub segments: Vec<SegmentAnalysis>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    /// The inlined program the plans refer to.
    pub ast: Ast,
    pub regions: Vec<RegionAnalysis>,
}

impl Analysis {
    pub fn region(&self, ordinal: usize) -> &RegionAnalysis {
        &self.regions[ordinal]
    }
}

/// Analyze an already-parsed program against a machine. `thread_override`
/// replaces the default team size (the core count) for regions without a
/// `num_threads` clause.
pub fn analyze_program(
    ast: &Ast,
    machine: &MachineConfig,
    thread_override: Option<usize>,
) -> Result<Analysis, AnalyzeError> {
    let ast = inline_functions(ast);
    let mut regions = Vec::new();
    let mut loop_ordinal = 0usize;

    for f in &ast.functions {
        let env = ConstEnv::from_function(&ast, f);
        let mut walker = RegionWalker {
            machine,
            env: &env,
            function: &f.name,
            thread_override,
            regions: &mut regions,
            loop_ordinal: &mut loop_ordinal,
            after_uses_stack: Vec::new(),
        };
        walker.walk_block(&f.body, 0)?;
    }
    Ok(Analysis { ast, regions })
}

struct RegionWalker<'a> {
    machine: &'a MachineConfig,
    env: &'a ConstEnv,
    function: &'a str,
    thread_override: Option<usize>,
    regions: &'a mut Vec<RegionAnalysis>,
    loop_ordinal: &'a mut usize,
    /// Uses of the statements after the current position, innermost block
    /// last; feeds live-out of plain-block segments.
    after_uses_stack: Vec<BTreeSet<String>>,
}

impl<'a> RegionWalker<'a> {
    fn walk_block(&mut self, b: &Block, loop_depth: usize) -> Result<(), AnalyzeError> {
        for (i, s) in b.stmts.iter().enumerate() {
            let mut after = BTreeSet::new();
            for later in &b.stmts[i + 1..] {
                after.extend(migration::gen_uses(&later.node));
            }
            self.after_uses_stack.push(after);
            self.walk_stmt(&s.node, loop_depth)?;
            self.after_uses_stack.pop();
        }
        Ok(())
    }

    fn walk_stmt(&mut self, s: &Stmt, loop_depth: usize) -> Result<(), AnalyzeError> {
        match s {
            Stmt::Parallel(region) => self.analyze_region(region, loop_depth),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                self.walk_block(then_body, loop_depth)?;
                if let Some(e) = else_body {
                    self.walk_block(e, loop_depth)?;
                }
                Ok(())
            }
            Stmt::For(f) => self.walk_block(&f.body, loop_depth + 1),
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } => {
                self.walk_block(body, loop_depth + 1)
            }
            _ => Ok(()),
        }
    }

    fn analyze_region(
        &mut self,
        region: &ParallelRegion,
        loop_depth: usize,
    ) -> Result<(), AnalyzeError> {
        let cores = self.machine.core_types();
        let n_threads = match &region.num_threads {
            Some(e) => {
                let v =
                    fold::fold_int_env(&e.node, self.env).ok_or(AnalyzeError::NonConstThreads)?;
                if v < 1 {
                    return Err(AnalyzeError::BadThreads(v));
                }
                if v as usize > cores.len() {
                    return Err(AnalyzeError::TooManyThreads {
                        requested: v,
                        cores: cores.len(),
                    });
                }
                v as usize
            }
            None => {
                let t = self.thread_override.unwrap_or(cores.len());
                if t < 1 || t > cores.len() {
                    return Err(AnalyzeError::TooManyThreads {
                        requested: t as i64,
                        cores: cores.len(),
                    });
                }
                t
            }
        };
        let team: Vec<CoreType> = cores[..n_threads].to_vec();
        let region_ordinal = self.regions.len();
        let reentrant = loop_depth > 0;
        let segments = partition_segments(region, region_ordinal);

        let mut analyses = Vec::with_capacity(segments.len());
        for (si, seg) in segments.iter().enumerate() {
            let analysis = match seg.kind {
                SegmentKind::WorksharingFor => {
                    *self.loop_ordinal += 1;
                    let of = seg.as_omp_for().expect("segment kind checked");
                    self.plan_for(seg, of, &team, reentrant, *self.loop_ordinal)?
                }
                SegmentKind::WorksharingSections => {
                    let ss = seg.as_sections().expect("segment kind checked");
                    let per_section: Vec<OpCounts> = ss
                        .sections
                        .iter()
                        .map(|b| count_block(b, self.env))
                        .collect();
                    let assignment =
                        schedule_sections(&per_section, &team, &self.machine.calibration)?;
                    let counts = count_block(&Block::new(vec![]), self.env);
                    let mut total = counts;
                    for c in &per_section {
                        total.add(c);
                    }
                    SegmentAnalysis {
                        segment: seg.clone(),
                        estimate: estimate_both(&total, &self.machine.calibration),
                        counts: total,
                        plan: SegmentPlan::Sections(assignment),
                        loop_ordinal: None,
                    }
                }
                SegmentKind::WorksharingSingle => {
                    let body = seg.as_single().expect("segment kind checked");
                    let counts = count_block(body, self.env);
                    let assignment = schedule_sections(
                        std::slice::from_ref(&counts),
                        &team,
                        &self.machine.calibration,
                    )?;
                    SegmentAnalysis {
                        segment: seg.clone(),
                        estimate: estimate_both(&counts, &self.machine.calibration),
                        counts,
                        plan: SegmentPlan::Single(assignment),
                        loop_ordinal: None,
                    }
                }
                SegmentKind::PlainBlock => {
                    let mut live_out: BTreeSet<String> = BTreeSet::new();
                    for later in &segments[si + 1..] {
                        for st in &later.body.stmts {
                            live_out.extend(migration::gen_uses(&st.node));
                        }
                    }
                    for frame in &self.after_uses_stack {
                        live_out.extend(frame.iter().cloned());
                    }
                    let plan = place_migration_points(
                        &seg.body,
                        &live_out,
                        &team,
                        &self.machine.calibration,
                        self.env,
                    );
                    let counts = count_block(&seg.body, self.env);
                    SegmentAnalysis {
                        segment: seg.clone(),
                        estimate: estimate_both(&counts, &self.machine.calibration),
                        counts,
                        plan: SegmentPlan::Block(plan),
                        loop_ordinal: None,
                    }
                }
            };
            analyses.push(analysis);
        }

        self.regions.push(RegionAnalysis {
            function: self.function.to_string(),
            region_ordinal,
            n_threads,
            reentrant,
            num_threads_expr: region
                .num_threads
                .as_ref()
                .map(|e| crate::frontend::printer::expr(&e.node)),
            segments: analyses,
        });
        Ok(())
    }

    fn plan_for(
        &self,
        seg: &ParallelSegment,
        of: &OmpFor,
        team: &[CoreType],
        region_reentrant: bool,
        ordinal: usize,
    ) -> Result<SegmentAnalysis, AnalyzeError> {
        let per_iter = per_iteration_counts(&of.loop_, self.env);
        let trip = fold::trip_count(&of.loop_, self.env);
        let calib = &self.machine.calibration;
        let (division, n_itrs) = match trip {
            Some(n) => (
                divide_iterations(n, team, &per_iter, calib),
                NItrs::Const(n),
            ),
            None => {
                let expr_text = crate::frontend::printer::expr(&fold::n_itrs_expr(&of.loop_));
                let mut d = symbolic_division(team, &per_iter, calib);
                d.symbolic = Some(expr_text.clone());
                (d, NItrs::Symbolic(expr_text))
            }
        };
        let fixed_size = classify_fixed_size(&per_iter, calib);
        let chunk = compute_chunk(&per_iter, calib, trip, team.len());
        let counts = match trip {
            Some(n) => per_iter.scale(n as u64),
            None => {
                let mut c = per_iter.clone();
                c.unknown = true;
                c
            }
        };
        Ok(SegmentAnalysis {
            segment: seg.clone(),
            estimate: estimate_both(&counts, calib),
            counts,
            plan: SegmentPlan::For(LoopPlan {
                division,
                chunk,
                fixed_size,
                reentrant: region_reentrant,
                n_itrs,
                per_iter,
            }),
            loop_ordinal: Some(ordinal),
        })
    }
}

/// Continuous speed-proportional fractions, for loops whose trip count is
/// only known at run time.
fn symbolic_division(
    team: &[CoreType],
    per_iter: &OpCounts,
    calib: &crate::workload::CalibrationTable,
) -> IterationDivision {
    let speeds: Vec<f64> = team
        .iter()
        .map(|&ct| {
            1.0 / crate::workload::estimate(per_iter, ct, calib)
                .total()
                .max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = speeds.iter().sum();
    let mut acc = 0.0;
    let scaledend = speeds
        .iter()
        .map(|s| {
            acc += s / total;
            acc.min(1.0)
        })
        .collect::<Vec<_>>();
    let mut d = IterationDivision {
        scaledend,
        symbolic: None,
    };
    if let Some(last) = d.scaledend.last_mut() {
        *last = 1.0;
    }
    d
}

// ---- serialized plan view ----------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanJson {
    pub machine_cores: Vec<String>,
    pub regions: Vec<RegionPlanJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionPlanJson {
    pub function: String,
    pub region: usize,
    pub n_threads: usize,
    pub reentrant: bool,
    pub segments: Vec<SegmentPlanJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentPlanJson {
    pub id: usize,
    pub kind: String,
    pub barrier_after: bool,
    pub counts: OpCounts,
    pub estimate: WorkloadEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_ordinal: Option<usize>,
    pub plan: SegmentPlan,
}

impl Analysis {
    pub fn to_plan_json(&self, machine: &MachineConfig) -> PlanJson {
        PlanJson {
            machine_cores: machine.core_types().iter().map(|c| c.to_string()).collect(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionPlanJson {
                    function: r.function.clone(),
                    region: r.region_ordinal,
                    n_threads: r.n_threads,
                    reentrant: r.reentrant,
                    segments: r
                        .segments
                        .iter()
                        .map(|s| SegmentPlanJson {
                            id: s.segment.id,
                            kind: format!("{:?}", s.segment.kind),
                            barrier_after: s.segment.barrier_after,
                            counts: s.counts.clone(),
                            estimate: s.estimate,
                            loop_ordinal: s.loop_ordinal,
                            plan: s.plan.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

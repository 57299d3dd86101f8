//! Lowering an analyzed program into the simulator's executable form:
//! sequential slices for the master thread, plus region descriptions with
//! per-segment work and plans.

use crate::frontend::ast::*;
use crate::frontend::SegmentKind;
use crate::plan::{Analysis, SegmentPlan};
use crate::scheduler::{IterationDivision, LoopPlan, MigrationPair, NItrs, SectionAssignment};
use crate::workload::{count_stmt, fold, ConstEnv, OpCounts};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("program has no `main` function")]
    NoMain,
    #[error("cannot simulate: loop around a parallel region has a non-constant trip count")]
    NonConstRegionLoop,
    #[error("cannot simulate: omp for trip count is not a compile-time constant")]
    SymbolicTrip,
    #[error("program expands to more than {0} region executions")]
    TooManyRegions(usize),
    #[error("section assignment maps section {section} to thread {thread}, team has {threads}")]
    BadAssignment {
        section: usize,
        thread: usize,
        threads: usize,
    },
    #[error(transparent)]
    Runtime(#[from] crate::runtime::RuntimeError),
    #[error(transparent)]
    Analyze(#[from] crate::plan::AnalyzeError),
    #[error("{0}")]
    Frontend(String),
}

const MAX_REGION_EXECUTIONS: usize = 4096;

#[derive(Debug, Clone)]
pub struct LoopSim {
    pub ordinal: usize,
    pub n_itrs: i64,
    pub per_iter: OpCounts,
    pub division: IterationDivision,
    pub chunk: i64,
    pub fixed_size: bool,
    pub reentrant: bool,
    /// Chunk interleaving of the original `schedule(static, k)` clause, for
    /// the HMP baseline; the default block split when absent.
    pub hmp_chunk: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct SectionsSim {
    /// Per section, per top-level statement counts.
    pub bodies: Vec<Vec<OpCounts>>,
    pub assignment: SectionAssignment,
}

#[derive(Debug, Clone)]
pub struct BlockSim {
    pub stmts: Vec<OpCounts>,
    pub pairs: Vec<MigrationPair>,
}

#[derive(Debug, Clone)]
pub enum SimSegment {
    Loop(LoopSim),
    Sections(SectionsSim),
    Block(BlockSim),
}

#[derive(Debug, Clone)]
pub struct SimSegmentEntry {
    pub segment: SimSegment,
    pub barrier_after: bool,
}

#[derive(Debug, Clone)]
pub struct SimRegion {
    pub region_ordinal: usize,
    pub n_threads: usize,
    pub segments: Vec<SimSegmentEntry>,
}

#[derive(Debug, Clone)]
pub enum SimItem {
    /// Master-thread statement run.
    Serial(OpCounts),
    Region(SimRegion),
}

#[derive(Debug, Clone)]
pub struct SimProgram {
    pub items: Vec<SimItem>,
}

/// Lower `main` of an analyzed program. Serial loops around regions unroll
/// (their trip counts must be constant); serial code without regions folds
/// into single slices.
pub fn build_program(analysis: &Analysis) -> Result<SimProgram, SimError> {
    let main = analysis.ast.function("main").ok_or(SimError::NoMain)?;
    let env = ConstEnv::from_function(&analysis.ast, main);
    let mut items = Vec::new();
    let mut region_idx = 0usize;
    lower_block(&main.body, analysis, &env, &mut items, &mut region_idx)?;
    let regions = items
        .iter()
        .filter(|i| matches!(i, SimItem::Region(_)))
        .count();
    if regions > MAX_REGION_EXECUTIONS {
        return Err(SimError::TooManyRegions(MAX_REGION_EXECUTIONS));
    }
    Ok(SimProgram { items })
}

fn contains_region(b: &Block) -> bool {
    b.stmts.iter().any(|s| match &s.node {
        Stmt::Parallel(_) => true,
        Stmt::If {
            then_body,
            else_body,
            ..
        } => contains_region(then_body) || else_body.as_ref().map(contains_region).unwrap_or(false),
        Stmt::For(f) => contains_region(&f.body),
        Stmt::While { body, .. } | Stmt::DoWhile { body, .. } => contains_region(body),
        _ => false,
    })
}

/// Number of parallel regions anywhere under a block, in analyzer order.
fn count_regions(b: &Block) -> usize {
    b.stmts
        .iter()
        .map(|s| match &s.node {
            Stmt::Parallel(_) => 1,
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                count_regions(then_body)
                    + else_body.as_ref().map(count_regions).unwrap_or(0)
            }
            Stmt::For(f) => count_regions(&f.body),
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } => count_regions(body),
            _ => 0,
        })
        .sum()
}

fn lower_block(
    b: &Block,
    analysis: &Analysis,
    env: &ConstEnv,
    items: &mut Vec<SimItem>,
    region_idx: &mut usize,
) -> Result<(), SimError> {
    for s in &b.stmts {
        match &s.node {
            Stmt::Parallel(_) => {
                let region = analysis
                    .regions
                    .get(*region_idx)
                    .ok_or(SimError::Frontend("region without analysis".into()))?;
                *region_idx += 1;
                items.push(SimItem::Region(lower_region(region, env)?));
            }
            Stmt::For(f) if contains_region(&f.body) => {
                let trips = fold::trip_count(f, env).ok_or(SimError::NonConstRegionLoop)?;
                // unroll: the region body replays per trip
                let mut inner = Vec::new();
                lower_block(&f.body, analysis, env, &mut inner, region_idx)?;
                if trips > MAX_REGION_EXECUTIONS as i64 {
                    return Err(SimError::TooManyRegions(MAX_REGION_EXECUTIONS));
                }
                for _ in 0..trips {
                    items.extend(inner.iter().cloned());
                }
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } if contains_region(then_body)
                || else_body.as_ref().map(contains_region).unwrap_or(false) =>
            {
                // regions under non-loop control flow simulate the then-path;
                // the analyzer walked both branches, so skip past the else
                // branch's region analyses to stay aligned
                lower_block(then_body, analysis, env, items, region_idx)?;
                if let Some(e) = else_body {
                    *region_idx += count_regions(e);
                }
            }
            Stmt::While { body, .. } | Stmt::DoWhile { body, .. } if contains_region(body) => {
                return Err(SimError::NonConstRegionLoop);
            }
            other => {
                let counts = count_stmt(other, env);
                if counts != OpCounts::default() {
                    match items.last_mut() {
                        Some(SimItem::Serial(acc)) => acc.add(&counts),
                        _ => items.push(SimItem::Serial(counts)),
                    }
                }
            }
        }
    }
    Ok(())
}

fn lower_region(
    region: &crate::plan::RegionAnalysis,
    env: &ConstEnv,
) -> Result<SimRegion, SimError> {
    let mut segments = Vec::new();
    for seg in &region.segments {
        let sim_segment = match (&seg.plan, seg.segment.kind) {
            (SegmentPlan::For(plan), SegmentKind::WorksharingFor) => {
                let of = seg.segment.as_omp_for().expect("segment kind");
                SimSegment::Loop(lower_loop(of, plan, seg.loop_ordinal.unwrap_or(0), env)?)
            }
            (SegmentPlan::Sections(assignment), SegmentKind::WorksharingSections) => {
                let ss = seg.segment.as_sections().expect("segment kind");
                SimSegment::Sections(lower_sections(
                    &ss.sections,
                    assignment,
                    region.n_threads,
                    env,
                )?)
            }
            (SegmentPlan::Single(assignment), SegmentKind::WorksharingSingle) => {
                let body = seg.segment.as_single().expect("segment kind");
                SimSegment::Sections(lower_sections(
                    std::slice::from_ref(body),
                    assignment,
                    region.n_threads,
                    env,
                )?)
            }
            (SegmentPlan::Block(plan), SegmentKind::PlainBlock) => SimSegment::Block(BlockSim {
                stmts: seg
                    .segment
                    .body
                    .stmts
                    .iter()
                    .map(|s| count_stmt(&s.node, env))
                    .collect(),
                pairs: plan.pairs.clone(),
            }),
            _ => return Err(SimError::Frontend("plan/segment kind mismatch".into())),
        };
        segments.push(SimSegmentEntry {
            segment: sim_segment,
            barrier_after: seg.segment.barrier_after,
        });
    }
    Ok(SimRegion {
        region_ordinal: region.region_ordinal,
        n_threads: region.n_threads,
        segments,
    })
}

fn lower_loop(
    of: &OmpFor,
    plan: &LoopPlan,
    ordinal: usize,
    env: &ConstEnv,
) -> Result<LoopSim, SimError> {
    let n_itrs = match plan.n_itrs {
        NItrs::Const(n) => n,
        NItrs::Symbolic(_) => fold::trip_count(&of.loop_, env).ok_or(SimError::SymbolicTrip)?,
    };
    let hmp_chunk = of
        .schedule
        .as_ref()
        .filter(|s| s.kind == ScheduleKind::Static)
        .and_then(|s| s.chunk.as_ref())
        .and_then(|c| fold::fold_int_env(&c.node, env));
    Ok(LoopSim {
        ordinal,
        n_itrs,
        per_iter: plan.per_iter.clone(),
        division: plan.division.clone(),
        chunk: plan.chunk,
        fixed_size: plan.fixed_size,
        reentrant: plan.reentrant,
        hmp_chunk,
    })
}

fn lower_sections(
    sections: &[Block],
    assignment: &SectionAssignment,
    n_threads: usize,
    env: &ConstEnv,
) -> Result<SectionsSim, SimError> {
    for (section, &thread) in assignment.assignment.iter().enumerate() {
        if thread >= n_threads {
            return Err(SimError::BadAssignment {
                section,
                thread,
                threads: n_threads,
            });
        }
    }
    Ok(SectionsSim {
        bodies: sections
            .iter()
            .map(|b| {
                let stmts: Vec<OpCounts> =
                    b.stmts.iter().map(|s| count_stmt(&s.node, env)).collect();
                if stmts.is_empty() {
                    vec![OpCounts::default()]
                } else {
                    stmts
                }
            })
            .collect(),
        assignment: assignment.clone(),
    })
}

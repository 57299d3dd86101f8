//! Partitioning of parallel regions into parallel-segments.
//!
//! A parallel-segment is either one work-sharing construct or a maximal run
//! of other statements bounded by barriers. Segments of one region are
//! totally ordered and their bodies concatenate (with barriers) back to the
//! region body.

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    WorksharingFor,
    WorksharingSections,
    WorksharingSingle,
    PlainBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelSegment {
    /// Ordinal within the region.
    pub id: usize,
    pub kind: SegmentKind,
    /// The segment's statements. A work-sharing segment holds exactly its
    /// construct; a plain-block segment holds the statement run.
    pub body: Block,
    pub region_id: usize,
    /// Whether a barrier (explicit, or the construct's implicit one) follows
    /// this segment. The region-end implicit barrier makes this true for the
    /// last segment.
    pub barrier_after: bool,
}

impl ParallelSegment {
    pub fn as_omp_for(&self) -> Option<&OmpFor> {
        match self.kind {
            SegmentKind::WorksharingFor => match &self.body.stmts[0].node {
                Stmt::OmpFor(of) => Some(of),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn as_sections(&self) -> Option<&OmpSections> {
        match self.kind {
            SegmentKind::WorksharingSections => match &self.body.stmts[0].node {
                Stmt::OmpSections(ss) => Some(ss),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn as_single(&self) -> Option<&Block> {
        match self.kind {
            SegmentKind::WorksharingSingle => match &self.body.stmts[0].node {
                Stmt::OmpSingle { body } => Some(body),
                _ => None,
            },
            _ => None,
        }
    }
}

pub fn partition_segments(region: &ParallelRegion, region_id: usize) -> Vec<ParallelSegment> {
    let mut segments: Vec<ParallelSegment> = Vec::new();
    let mut run: Vec<Sp<Stmt>> = Vec::new();

    let close_run =
        |segments: &mut Vec<ParallelSegment>, run: &mut Vec<Sp<Stmt>>, barrier: bool| {
            if run.is_empty() {
                // A barrier directly after a work-sharing construct adds no new
                // segment; it only confirms the trailing barrier.
                if barrier {
                    if let Some(last) = segments.last_mut() {
                        last.barrier_after = true;
                    }
                }
                return;
            }
            let body = Block::new(std::mem::take(run));
            segments.push(ParallelSegment {
                id: segments.len(),
                kind: SegmentKind::PlainBlock,
                body,
                region_id,
                barrier_after: barrier,
            });
        };

    for s in &region.body.stmts {
        match &s.node {
            Stmt::Barrier => close_run(&mut segments, &mut run, true),
            Stmt::OmpFor(of) => {
                close_run(&mut segments, &mut run, false);
                segments.push(ParallelSegment {
                    id: segments.len(),
                    kind: SegmentKind::WorksharingFor,
                    body: Block::new(vec![s.clone()]),
                    region_id,
                    barrier_after: !of.nowait,
                });
            }
            Stmt::OmpSections(ss) => {
                close_run(&mut segments, &mut run, false);
                segments.push(ParallelSegment {
                    id: segments.len(),
                    kind: SegmentKind::WorksharingSections,
                    body: Block::new(vec![s.clone()]),
                    region_id,
                    barrier_after: !ss.nowait,
                });
            }
            Stmt::OmpSingle { .. } => {
                close_run(&mut segments, &mut run, false);
                segments.push(ParallelSegment {
                    id: segments.len(),
                    kind: SegmentKind::WorksharingSingle,
                    body: Block::new(vec![s.clone()]),
                    region_id,
                    barrier_after: true,
                });
            }
            _ => run.push(s.clone()),
        }
    }
    close_run(&mut segments, &mut run, true);
    if let Some(last) = segments.last_mut() {
        // Region end is an implicit barrier.
        last.barrier_after = true;
    }
    segments
}

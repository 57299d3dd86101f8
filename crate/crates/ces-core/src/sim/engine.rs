//! The deterministic event loop.
//!
//! Time advances in integer femtosecond ticks. Each distinct time is
//! processed as one batch: due completions drain in thread order, runnable
//! threads then *resolve* their next step (worklist pulls, exhaustion,
//! barrier arrivals — everything that takes no simulated time), the HMP
//! policy step runs, and finally the resolved slices *commit* on whatever
//! core each thread ended up on. Lock acquisition order inside the embedded
//! worklist therefore equals event order with thread-id tiebreak, and the
//! policy sees barrier blocking before committing to new work, which is
//! what lets the static-schedule baseline swap cores exactly at t1.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use super::build::{BlockSim, LoopSim, SimError, SimItem, SimProgram, SimRegion, SimSegment};
use super::report::{CoreReport, EventKind, SimCounts, SimReport, TraceEvent};
use super::time::Ticks;
use crate::machine::MachineConfig;
use crate::runtime::{Doitr, StealStats, Worklist};
use crate::scheduler::{update_scaledend, IterationDivision};
use crate::workload::{CoreType, OpCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Hmp,
    Ces,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Hmp => "hmp",
            Policy::Ces => "ces",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hmp" => Ok(Policy::Hmp),
            "ces" => Ok(Policy::Ces),
            other => Err(format!("unknown policy `{other}` (expected hmp or ces)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub policy: Policy,
    /// Reserved for randomized-delay experiments; the default simulation is
    /// fully deterministic and ignores it.
    pub seed: u64,
    /// Override the HMP baseline's arbitrary section placement (used by the
    /// Monte-Carlo comparison); section -> thread.
    pub hmp_sections_assignment: Option<Vec<usize>>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            policy: Policy::Ces,
            seed: 0,
            hmp_sections_assignment: None,
        }
    }
}

pub fn run(
    program: &SimProgram,
    machine: &MachineConfig,
    opts: &SimOptions,
) -> Result<SimReport, SimError> {
    let mut engine = Engine::new(program, machine, opts);
    engine.advance_items()?;
    engine.commit_pending();
    engine.drive()?;
    Ok(engine.finish())
}

// ---- engine state -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct QueuedEvent {
    at: Ticks,
    thread: usize,
    seq: u64,
    epoch: u64,
}

#[derive(Debug, Clone)]
struct InFlight {
    started: Ticks,
    finish: Ticks,
    counts: Option<OpCounts>,
    kind: EventKind,
    done_marker: Option<usize>,
}

/// A slice resolved but not yet committed; its duration is fixed or derived
/// from counts on the thread's final core.
#[derive(Debug, Clone)]
struct PendingSlice {
    counts: Option<OpCounts>,
    fixed_dur: Option<Ticks>,
    kind: EventKind,
    done_marker: Option<usize>,
}

#[derive(Debug, Clone)]
enum Cursor {
    /// Master thread between items.
    Idle,
    SegmentEntry {
        seg: usize,
    },
    LoopConsume {
        seg: usize,
        /// A stolen index whose steal charge is in flight.
        pending_index: Option<i64>,
    },
    Sections {
        seg: usize,
        pos: usize,
    },
    Block {
        seg: usize,
        stmt: usize,
        boundary_done: bool,
    },
    Finished,
}

#[derive(Debug, Clone)]
struct ThreadState {
    core: usize,
    epoch: u64,
    inflight: Option<InFlight>,
    pending: Option<PendingSlice>,
    /// Extra start delay for the next committed slice (migration or
    /// exchange stall).
    delay: Ticks,
    cursor: Cursor,
    blocked: bool,
    busy_log: Vec<(Ticks, Ticks)>,
    exchanged: BTreeSet<(usize, usize)>,
}

impl ThreadState {
    fn new(core: usize) -> Self {
        ThreadState {
            core,
            epoch: 0,
            inflight: None,
            pending: None,
            delay: Ticks::ZERO,
            cursor: Cursor::Idle,
            blocked: false,
            busy_log: Vec::new(),
            exchanged: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct CoreState {
    busy: Ticks,
    occupant: Option<usize>,
}

struct SyncPoint {
    arrived: BTreeSet<usize>,
    expected: usize,
    released: bool,
}

struct LoopExec {
    worklist: Worklist,
    executed: Vec<u64>,
    hmp_ranges: Vec<Vec<(i64, i64)>>,
    fixed_size: bool,
    left: usize,
}

struct SectionsExec {
    /// Per thread: (section, stmt, counts, last-stmt flag).
    queues: Vec<Vec<(usize, usize, OpCounts, bool)>>,
}

struct RegionExec {
    region: SimRegion,
    entry_sync: Vec<Option<usize>>,
    exit_sync: Vec<Option<usize>>,
    loops: BTreeMap<usize, LoopExec>,
    sections: BTreeMap<usize, SectionsExec>,
    mg: BTreeMap<usize, Vec<i64>>,
    live: BTreeSet<usize>,
}

struct Engine<'a> {
    machine: &'a MachineConfig,
    opts: &'a SimOptions,
    policy: Policy,
    now: Ticks,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    seq: u64,
    threads: Vec<ThreadState>,
    cores: Vec<CoreState>,
    trace: Vec<TraceEvent>,
    counts: SimCounts,
    steal_totals: StealStats,
    items: Vec<SimItem>,
    item_idx: usize,
    region: Option<RegionExec>,
    syncs: Vec<SyncPoint>,
    ready: BTreeSet<usize>,
    division_state: BTreeMap<usize, IterationDivision>,
}

impl<'a> Engine<'a> {
    fn new(program: &SimProgram, machine: &'a MachineConfig, opts: &'a SimOptions) -> Self {
        let n_cores = machine.cores.len();
        let mut threads: Vec<ThreadState> = (0..n_cores).map(ThreadState::new).collect();
        if threads.is_empty() {
            threads.push(ThreadState::new(0));
        }
        let mut cores = vec![CoreState::default(); n_cores.max(1)];
        cores[0].occupant = Some(0);
        Engine {
            machine,
            opts,
            policy: opts.policy,
            now: Ticks::ZERO,
            queue: BinaryHeap::new(),
            seq: 0,
            threads,
            cores,
            trace: Vec::new(),
            counts: SimCounts::default(),
            steal_totals: StealStats::default(),
            items: program.items.clone(),
            item_idx: 0,
            region: None,
            syncs: Vec::new(),
            ready: BTreeSet::new(),
            division_state: BTreeMap::new(),
        }
    }

    // ---- timing -----------------------------------------------------------

    fn slice_ticks(&self, counts: &OpCounts, core: usize) -> Ticks {
        let c = self.machine.calib_for_core(core);
        let seconds = if counts.unknown {
            self.machine.calibration.unknown_cost_alu * c.cycles_per_alu / c.frequency_hz
        } else {
            (counts.alu as f64 * c.cycles_per_alu
                + counts.mem as f64 * c.cycles_per_mem
                + counts.branch as f64 * c.branch_miss_rate * c.cycles_per_branch_miss)
                / c.frequency_hz
        };
        Ticks::from_seconds(seconds)
    }

    fn core_type(&self, core: usize) -> CoreType {
        self.machine.cores[core].core_type
    }

    // ---- event plumbing -----------------------------------------------------

    fn push_event(&mut self, thread: usize, at: Ticks) {
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent {
            at,
            thread,
            seq: self.seq,
            epoch: self.threads[thread].epoch,
        }));
    }

    fn emit_marker(&mut self, thread: usize, kind: EventKind) {
        let core = self.threads[thread].core;
        self.trace.push(TraceEvent {
            t: self.now,
            core,
            thread,
            kind,
            dur: Ticks::ZERO,
        });
    }

    /// Charge `dur` of busy time on `core` at `end` and record it.
    fn charge(&mut self, core: usize, thread: usize, kind: EventKind, end: Ticks, dur: Ticks) {
        self.cores[core].busy += dur;
        self.trace.push(TraceEvent {
            t: end,
            core,
            thread,
            kind,
            dur,
        });
    }

    fn begin_slice(&mut self, thread: usize, slice: PendingSlice) {
        let core = self.threads[thread].core;
        let dur = slice.fixed_dur.unwrap_or_else(|| match &slice.counts {
            Some(c) => self.slice_ticks(c, core),
            None => Ticks::ZERO,
        });
        let delay = std::mem::replace(&mut self.threads[thread].delay, Ticks::ZERO);
        let started = self.now + delay;
        let finish = started + dur;
        self.threads[thread].inflight = Some(InFlight {
            started,
            finish,
            counts: slice.counts,
            kind: slice.kind,
            done_marker: slice.done_marker,
        });
        self.push_event(thread, finish);
    }

    fn complete_slice(&mut self, thread: usize) {
        let inflight = self.threads[thread]
            .inflight
            .take()
            .expect("completion without in-flight slice");
        let dur = inflight.finish - inflight.started;
        let core = self.threads[thread].core;
        self.cores[core].busy += dur;
        if dur > Ticks::ZERO {
            self.threads[thread]
                .busy_log
                .push((inflight.started, inflight.finish));
            self.prune_busy_log(thread);
        }
        self.trace.push(TraceEvent {
            t: self.now,
            core,
            thread,
            kind: inflight.kind,
            dur,
        });
        if let Some(section) = inflight.done_marker {
            self.emit_marker(thread, EventKind::SectionDone { section });
        }
    }

    /// Preempt a running thread: credit partial progress on the old core,
    /// re-time the remainder for `new_core`, resume after `stall`.
    fn retime_inflight(&mut self, thread: usize, new_core: usize, stall: Ticks) {
        let Some(inflight) = self.threads[thread].inflight.take() else {
            return;
        };
        let old_core = self.threads[thread].core;
        let elapsed = self.now.saturating_sub(inflight.started);
        if elapsed > Ticks::ZERO {
            self.cores[old_core].busy += elapsed;
            self.threads[thread]
                .busy_log
                .push((inflight.started, self.now));
            self.trace.push(TraceEvent {
                t: self.now,
                core: old_core,
                thread,
                kind: inflight.kind,
                dur: elapsed,
            });
        }
        let total_old = (inflight.finish - inflight.started).0;
        let remaining_new = match (&inflight.counts, total_old) {
            (Some(counts), n) if n > 0 => {
                let dur_new = self.slice_ticks(counts, new_core);
                let frac = (n - elapsed.0.min(n)) as f64 / n as f64;
                Ticks((dur_new.0 as f64 * frac).round() as u64)
            }
            _ => inflight.finish.saturating_sub(self.now),
        };
        self.threads[thread].epoch += 1;
        let started = self.now + stall;
        let finish = started + remaining_new;
        self.threads[thread].inflight = Some(InFlight {
            started,
            finish,
            counts: inflight.counts,
            kind: inflight.kind,
            done_marker: inflight.done_marker,
        });
        // push against the new core's schedule; the core field is updated
        // by the caller right after
        self.push_event(thread, finish);
    }

    fn prune_busy_log(&mut self, thread: usize) {
        let window = Ticks::from_seconds(self.machine.hmp.window_s);
        let cutoff = self.now.saturating_sub(window);
        self.threads[thread].busy_log.retain(|&(_, e)| e > cutoff);
    }

    // ---- main loop ------------------------------------------------------------

    fn drive(&mut self) -> Result<(), SimError> {
        while let Some(&Reverse(head)) = self.queue.peek() {
            let at = head.at;
            let mut batch = Vec::new();
            while let Some(&Reverse(ev)) = self.queue.peek() {
                if ev.at != at {
                    break;
                }
                self.queue.pop();
                let valid = ev.epoch == self.threads[ev.thread].epoch
                    && self.threads[ev.thread]
                        .inflight
                        .as_ref()
                        .map(|f| f.finish == ev.at)
                        .unwrap_or(false);
                if valid {
                    batch.push(ev);
                }
            }
            if batch.is_empty() {
                continue;
            }
            self.now = at;
            batch.sort_by_key(|e| (e.thread, e.seq));
            for ev in batch {
                self.complete_slice(ev.thread);
                match self.threads[ev.thread].cursor {
                    Cursor::Idle => self.advance_items()?,
                    _ => {
                        self.ready.insert(ev.thread);
                    }
                }
            }
            self.resolve_ready()?;
            if self.policy == Policy::Hmp {
                self.hmp_step();
            }
            self.commit_pending();
        }
        Ok(())
    }

    /// Drain the ready set, advancing cursors through zero-time actions and
    /// leaving at most one pending slice per thread.
    fn resolve_ready(&mut self) -> Result<(), SimError> {
        while let Some(&thread) = self.ready.iter().next() {
            self.ready.remove(&thread);
            if self.threads[thread].blocked || self.threads[thread].pending.is_some() {
                continue;
            }
            self.step_thread(thread)?;
        }
        Ok(())
    }

    fn commit_pending(&mut self) {
        for thread in 0..self.threads.len() {
            if let Some(slice) = self.threads[thread].pending.take() {
                self.begin_slice(thread, slice);
            }
        }
    }

    fn step_thread(&mut self, thread: usize) -> Result<(), SimError> {
        match self.threads[thread].cursor.clone() {
            Cursor::Idle | Cursor::Finished => Ok(()),
            Cursor::SegmentEntry { seg } => self.enter_segment(thread, seg),
            Cursor::LoopConsume { seg, pending_index } => {
                self.loop_consume(thread, seg, pending_index)
            }
            Cursor::Sections { seg, pos } => self.sections_step(thread, seg, pos),
            Cursor::Block {
                seg,
                stmt,
                boundary_done,
            } => self.block_step(thread, seg, stmt, boundary_done),
        }
    }

    // ---- item / region driving ---------------------------------------------------

    fn advance_items(&mut self) -> Result<(), SimError> {
        if self.item_idx >= self.items.len() {
            return Ok(());
        }
        match self.items[self.item_idx].clone() {
            SimItem::Serial(counts) => {
                self.item_idx += 1;
                self.threads[0].cursor = Cursor::Idle;
                self.threads[0].pending = Some(PendingSlice {
                    counts: Some(counts),
                    fixed_dur: None,
                    kind: EventKind::Serial,
                    done_marker: None,
                });
            }
            SimItem::Region(region) => {
                self.item_idx += 1;
                self.start_region(region)?;
            }
        }
        Ok(())
    }

    fn start_region(&mut self, region: SimRegion) -> Result<(), SimError> {
        let t = region.n_threads;
        self.emit_marker(
            0,
            EventKind::RegionStart {
                region: region.region_ordinal,
            },
        );

        for core in self.cores.iter_mut() {
            core.occupant = None;
        }
        for i in 0..t {
            self.threads[i].core = i;
            self.threads[i].cursor = Cursor::SegmentEntry { seg: 0 };
            self.threads[i].blocked = false;
            self.threads[i].delay = Ticks::ZERO;
            self.threads[i].exchanged.clear();
            self.threads[i].busy_log.clear();
            self.cores[i].occupant = Some(i);
        }

        let mut entry_sync = Vec::new();
        let mut exit_sync = Vec::new();
        for entry in &region.segments {
            if matches!(entry.segment, SimSegment::Loop(_)) && self.policy == Policy::Ces {
                entry_sync.push(Some(self.new_sync(t)));
            } else {
                entry_sync.push(None);
            }
            if entry.barrier_after {
                exit_sync.push(Some(self.new_sync(t)));
            } else {
                exit_sync.push(None);
            }
        }

        let mut exec = RegionExec {
            entry_sync,
            exit_sync,
            loops: BTreeMap::new(),
            sections: BTreeMap::new(),
            mg: BTreeMap::new(),
            live: (0..t).collect(),
            region,
        };

        for (si, entry) in exec.region.segments.clone().iter().enumerate() {
            match &entry.segment {
                SimSegment::Loop(l) => {
                    let division = self
                        .division_state
                        .get(&l.ordinal)
                        .cloned()
                        .unwrap_or_else(|| l.division.clone());
                    let worklist = Worklist::initialize(&division, l.n_itrs, l.chunk)?;
                    exec.loops.insert(
                        si,
                        LoopExec {
                            worklist,
                            executed: vec![0; t],
                            hmp_ranges: hmp_static_ranges(l, t),
                            fixed_size: l.fixed_size,
                            left: 0,
                        },
                    );
                }
                SimSegment::Sections(s) => {
                    let assignment: Vec<usize> =
                        match (&self.opts.hmp_sections_assignment, self.policy) {
                            (Some(map), Policy::Hmp) if map.len() == s.bodies.len() => map.clone(),
                            (_, Policy::Hmp) => (0..s.bodies.len()).map(|i| i % t).collect(),
                            (_, Policy::Ces) => s.assignment.assignment.clone(),
                        };
                    let mut queues: Vec<Vec<(usize, usize, OpCounts, bool)>> = vec![Vec::new(); t];
                    for (section, &thread) in assignment.iter().enumerate() {
                        let body = &s.bodies[section];
                        for (stmt, counts) in body.iter().enumerate() {
                            queues[thread].push((
                                section,
                                stmt,
                                counts.clone(),
                                stmt + 1 == body.len(),
                            ));
                        }
                    }
                    exec.sections.insert(si, SectionsExec { queues });
                }
                SimSegment::Block(_) => {
                    exec.mg.insert(si, vec![-1; t]);
                }
            }
        }

        self.region = Some(exec);
        for i in 0..t {
            self.ready.insert(i);
        }
        self.resolve_ready()?;
        Ok(())
    }

    fn new_sync(&mut self, expected: usize) -> usize {
        self.syncs.push(SyncPoint {
            arrived: BTreeSet::new(),
            expected,
            released: false,
        });
        self.syncs.len() - 1
    }

    fn enter_segment(&mut self, thread: usize, seg: usize) -> Result<(), SimError> {
        let Some(exec) = self.region.as_ref() else {
            return Ok(());
        };
        if seg >= exec.region.segments.len() {
            self.finish_region_thread(thread)?;
            return Ok(());
        }
        let entry = exec.entry_sync[seg];
        match &exec.region.segments[seg].segment {
            SimSegment::Loop(_) => {
                self.threads[thread].cursor = Cursor::LoopConsume {
                    seg,
                    pending_index: None,
                };
                match entry {
                    Some(sync) => self.arrive_sync(thread, sync),
                    None => {
                        self.ready.insert(thread);
                    }
                }
            }
            SimSegment::Sections(_) => {
                self.threads[thread].cursor = Cursor::Sections { seg, pos: 0 };
                self.ready.insert(thread);
            }
            SimSegment::Block(_) => {
                self.threads[thread].cursor = Cursor::Block {
                    seg,
                    stmt: 0,
                    boundary_done: false,
                };
                self.ready.insert(thread);
            }
        }
        Ok(())
    }

    // ---- loops ----------------------------------------------------------------------

    fn loop_consume(
        &mut self,
        thread: usize,
        seg: usize,
        pending_index: Option<i64>,
    ) -> Result<(), SimError> {
        let l = {
            let exec = self.region.as_ref().expect("loop outside region");
            match &exec.region.segments[seg].segment {
                SimSegment::Loop(l) => l.clone(),
                _ => unreachable!("cursor kind matches segment kind"),
            }
        };
        if let Some(index) = pending_index {
            self.threads[thread].cursor = Cursor::LoopConsume {
                seg,
                pending_index: None,
            };
            self.queue_iteration(thread, seg, &l, index);
            return Ok(());
        }
        let exec = self.region.as_mut().expect("loop outside region");
        let lex = exec.loops.get_mut(&seg).expect("loop state");
        let next = match self.policy {
            Policy::Ces => {
                let outcome = if lex.fixed_size {
                    match lex.worklist.doitr_nosteal(thread) {
                        -1 => Doitr::Exhausted,
                        i => Doitr::Local(i),
                    }
                } else {
                    lex.worklist.doitr_outcome(thread)
                };
                match outcome {
                    Doitr::Local(i) => Some((i, None)),
                    Doitr::Stolen {
                        first,
                        victim,
                        count,
                    } => Some((first, Some((victim, count)))),
                    Doitr::Exhausted => None,
                }
            }
            Policy::Hmp => {
                let ranges = &mut lex.hmp_ranges[thread];
                loop {
                    match ranges.first_mut() {
                        Some((lo, hi)) if *lo < *hi => {
                            let i = *lo;
                            *lo += 1;
                            break Some((i, None));
                        }
                        Some(_) => {
                            ranges.remove(0);
                        }
                        None => break None,
                    }
                }
            }
        };
        match next {
            Some((index, stolen)) => {
                if let Some((victim, count)) = stolen {
                    self.counts.steals_succeeded += 1;
                    self.counts.iterations_stolen += count as u64;
                    let steal_ticks = Ticks::from_seconds(self.machine.calibration.steal_cost_s);
                    if steal_ticks > Ticks::ZERO {
                        self.threads[thread].cursor = Cursor::LoopConsume {
                            seg,
                            pending_index: Some(index),
                        };
                        self.threads[thread].pending = Some(PendingSlice {
                            counts: None,
                            fixed_dur: Some(steal_ticks),
                            kind: EventKind::Steal { victim, count },
                            done_marker: None,
                        });
                        return Ok(());
                    }
                    self.emit_marker(thread, EventKind::Steal { victim, count });
                }
                self.queue_iteration(thread, seg, &l, index);
            }
            None => self.leave_segment(thread, seg)?,
        }
        Ok(())
    }

    fn queue_iteration(&mut self, thread: usize, seg: usize, l: &LoopSim, index: i64) {
        if let Some(exec) = self.region.as_mut() {
            if let Some(lex) = exec.loops.get_mut(&seg) {
                lex.executed[thread] += 1;
            }
        }
        self.threads[thread].pending = Some(PendingSlice {
            counts: Some(l.per_iter.clone()),
            fixed_dur: None,
            kind: EventKind::Iter {
                ordinal: l.ordinal,
                index,
            },
            done_marker: None,
        });
    }

    // ---- sections ---------------------------------------------------------------------

    fn sections_step(&mut self, thread: usize, seg: usize, pos: usize) -> Result<(), SimError> {
        let item = {
            let exec = self.region.as_ref().expect("sections outside region");
            let sx = exec.sections.get(&seg).expect("sections state");
            sx.queues[thread].get(pos).cloned()
        };
        match item {
            Some((section, stmt, counts, last)) => {
                self.threads[thread].cursor = Cursor::Sections { seg, pos: pos + 1 };
                self.threads[thread].pending = Some(PendingSlice {
                    counts: Some(counts),
                    fixed_dur: None,
                    kind: EventKind::SectionStmt { section, stmt },
                    done_marker: last.then_some(section),
                });
                Ok(())
            }
            None => self.leave_segment(thread, seg),
        }
    }

    // ---- plain blocks --------------------------------------------------------------------

    fn block_step(
        &mut self,
        thread: usize,
        seg: usize,
        stmt: usize,
        boundary_done: bool,
    ) -> Result<(), SimError> {
        let b = {
            let exec = self.region.as_ref().expect("block outside region");
            match &exec.region.segments[seg].segment {
                SimSegment::Block(b) => b.clone(),
                _ => unreachable!("cursor kind matches segment kind"),
            }
        };
        if !boundary_done {
            let exchanged_stall = self.process_boundary(thread, seg, &b, stmt);
            self.threads[thread].cursor = Cursor::Block {
                seg,
                stmt,
                boundary_done: true,
            };
            if exchanged_stall {
                // the stall slice is pending; the statement follows it
                return Ok(());
            }
        }
        if stmt < b.stmts.len() {
            self.threads[thread].cursor = Cursor::Block {
                seg,
                stmt: stmt + 1,
                boundary_done: false,
            };
            self.threads[thread].pending = Some(PendingSlice {
                counts: Some(b.stmts[stmt].clone()),
                fixed_dur: None,
                kind: EventKind::BlockStmt { stmt },
                done_marker: None,
            });
            Ok(())
        } else {
            self.leave_segment(thread, seg)
        }
    }

    /// Publish / scan markers at a block boundary (CES only). Returns true
    /// when an exchange stall slice was queued for this thread.
    fn process_boundary(
        &mut self,
        thread: usize,
        seg: usize,
        b: &BlockSim,
        boundary: usize,
    ) -> bool {
        if self.policy != Policy::Ces || b.pairs.is_empty() {
            return false;
        }
        for pair in b.pairs.iter().filter(|p| p.mgp == boundary) {
            if self.core_type(self.threads[thread].core) == CoreType::Big {
                if let Some(exec) = self.region.as_mut() {
                    if let Some(mg) = exec.mg.get_mut(&seg) {
                        mg[thread] = mg[thread].max(pair.pt as i64);
                    }
                }
                self.emit_marker(thread, EventKind::Publish { pt: pair.pt });
            }
        }
        for pair in b.pairs.iter().filter(|p| p.mp == boundary) {
            if self.core_type(self.threads[thread].core) != CoreType::Little {
                continue;
            }
            if self.threads[thread].exchanged.contains(&(seg, pair.pt)) {
                continue;
            }
            let victim = {
                let exec = self.region.as_ref().expect("block outside region");
                let team = exec.region.n_threads;
                let mg = exec.mg.get(&seg).cloned().unwrap_or_default();
                (0..team).find(|&v| {
                    v != thread
                        && self.core_type(self.threads[v].core) == CoreType::Big
                        && mg.get(v).copied().unwrap_or(-1) >= pair.pt as i64
                })
            };
            if let Some(victim) = victim {
                self.threads[thread].exchanged.insert((seg, pair.pt));
                self.counts.exchanges += 1;
                return self.exchange(thread, victim, pair.pt, pair.c_ex_s);
            }
        }
        false
    }

    /// Swap cores with the victim; both sides pay the exchange cost on
    /// their new cores. Returns true when the attacker got a stall slice.
    fn exchange(&mut self, attacker: usize, victim: usize, pt: usize, c_ex_s: f64) -> bool {
        let stall = Ticks::from_seconds(c_ex_s);
        let a_core = self.threads[attacker].core;
        let v_core = self.threads[victim].core;
        self.emit_marker(attacker, EventKind::Exchange { with: victim, pt });

        let victim_running = self.threads[victim].inflight.is_some();
        if victim_running {
            self.retime_inflight(victim, a_core, stall);
        }
        self.threads[victim].core = a_core;
        self.threads[attacker].core = v_core;
        self.cores[a_core].occupant = Some(victim);
        self.cores[v_core].occupant = Some(attacker);

        if stall > Ticks::ZERO {
            if victim_running {
                // the retimed slice resumes after the stall; charge the
                // stall itself as exchange work on the victim's new core
                self.charge(
                    a_core,
                    victim,
                    EventKind::Exchange { with: attacker, pt },
                    self.now + stall,
                    stall,
                );
            } else if self.threads[victim].pending.is_some() || self.ready.contains(&victim) {
                // runnable but uncommitted: push its next slice out
                self.threads[victim].delay += stall;
                self.charge(
                    a_core,
                    victim,
                    EventKind::Exchange { with: attacker, pt },
                    self.now + stall,
                    stall,
                );
            } else {
                // blocked at a barrier or finished: the wait absorbs the
                // stall, only the cache-movement work is charged
                self.charge(
                    a_core,
                    victim,
                    EventKind::Exchange { with: attacker, pt },
                    self.now + stall,
                    stall,
                );
            }
            self.threads[attacker].pending = Some(PendingSlice {
                counts: None,
                fixed_dur: Some(stall),
                kind: EventKind::Exchange { with: victim, pt },
                done_marker: None,
            });
            true
        } else {
            false
        }
    }

    // ---- barriers -----------------------------------------------------------------------

    fn leave_segment(&mut self, thread: usize, seg: usize) -> Result<(), SimError> {
        self.note_loop_leaver(seg);
        let exit = {
            let exec = self.region.as_ref().expect("segment outside region");
            exec.exit_sync[seg]
        };
        self.threads[thread].cursor = Cursor::SegmentEntry { seg: seg + 1 };
        match exit {
            Some(sync) => self.arrive_sync(thread, sync),
            None => {
                self.ready.insert(thread);
            }
        }
        Ok(())
    }

    /// After the last consumer leaves a re-entrant loop, fold the observed
    /// execution into the next instance's division.
    fn note_loop_leaver(&mut self, seg: usize) {
        let Some(exec) = self.region.as_mut() else {
            return;
        };
        let team = exec.region.n_threads;
        let SimSegment::Loop(l) = exec.region.segments[seg].segment.clone() else {
            return;
        };
        let Some(lex) = exec.loops.get_mut(&seg) else {
            return;
        };
        lex.left += 1;
        if lex.left == team && l.reentrant && self.policy == Policy::Ces {
            let executed: Vec<i64> = lex.executed.iter().map(|&c| c as i64).collect();
            if executed.iter().sum::<i64>() == l.n_itrs {
                if let Ok(div) = update_scaledend(&executed, l.n_itrs) {
                    self.division_state.insert(l.ordinal, div);
                }
            }
        }
    }

    fn arrive_sync(&mut self, thread: usize, sync: usize) {
        self.emit_marker(thread, EventKind::BarrierArrive { sync });
        let complete = {
            let point = &mut self.syncs[sync];
            point.arrived.insert(thread);
            point.arrived.len() == point.expected
        };
        if complete {
            self.syncs[sync].released = true;
            let waiting: Vec<usize> = self.syncs[sync].arrived.iter().copied().collect();
            for t in waiting {
                self.emit_marker(t, EventKind::BarrierRelease { sync });
                self.threads[t].blocked = false;
                self.ready.insert(t);
            }
        } else {
            self.counts.barrier_waits += 1;
            self.threads[thread].blocked = true;
        }
    }

    fn finish_region_thread(&mut self, thread: usize) -> Result<(), SimError> {
        self.threads[thread].cursor = Cursor::Finished;
        let done = {
            let Some(exec) = self.region.as_mut() else {
                return Ok(());
            };
            exec.live.remove(&thread);
            exec.live.is_empty()
        };
        if done {
            let exec = self.region.take().expect("region is active");
            for lex in exec.loops.values() {
                let s = lex.worklist.stats();
                self.steal_totals.steals_attempted += s.steals_attempted;
                self.steal_totals.steals_succeeded += s.steals_succeeded;
                self.steal_totals.iterations_stolen += s.iterations_stolen;
                self.steal_totals.lock_acquisitions += s.lock_acquisitions;
            }
            self.emit_marker(
                0,
                EventKind::RegionEnd {
                    region: exec.region.region_ordinal,
                },
            );
            self.threads[0].cursor = Cursor::Idle;
            self.advance_items()?;
        }
        Ok(())
    }

    // ---- HMP policy ------------------------------------------------------------------------

    fn running_now(&self, thread: usize) -> bool {
        !self.threads[thread].blocked
            && !matches!(self.threads[thread].cursor, Cursor::Finished | Cursor::Idle)
            && (self.threads[thread].inflight.is_some()
                || self.threads[thread].pending.is_some()
                || self.ready.contains(&thread))
    }

    fn utilization(&self, thread: usize) -> f64 {
        let window = self.machine.hmp.window_s;
        if window <= 0.0 {
            return if self.running_now(thread) { 1.0 } else { 0.0 };
        }
        let w = Ticks::from_seconds(window);
        let lo = self.now.saturating_sub(w);
        let mut busy = 0u64;
        for &(s, e) in &self.threads[thread].busy_log {
            let s = s.max(lo);
            let e = e.min(self.now);
            if e > s {
                busy += (e - s).0;
            }
        }
        if let Some(f) = &self.threads[thread].inflight {
            let s = f.started.max(lo);
            if self.now > s {
                busy += (self.now - s).0;
            }
        }
        busy as f64 / w.0 as f64
    }

    /// Utilization-driven migrations: big-hosted idle threads vacate to
    /// free LITTLE cores, busy LITTLE-hosted threads move up to free or
    /// down-migratable big cores (swapping with the displaced thread).
    fn hmp_step(&mut self) {
        let Some(exec) = self.region.as_ref() else {
            return;
        };
        let team = exec.region.n_threads;
        let up = self.machine.hmp.up_threshold;
        let down = self.machine.hmp.down_threshold;
        let util: Vec<f64> = (0..team).map(|t| self.utilization(t)).collect();

        // phase A: vacate big cores held by idle threads when LITTLE
        // capacity is free
        for (t, &u) in util.iter().enumerate() {
            if self.core_type(self.threads[t].core) == CoreType::Big && u < down {
                let free_little = (0..self.cores.len()).find(|&c| {
                    self.core_type(c) == CoreType::Little && self.cores[c].occupant.is_none()
                });
                if let Some(c) = free_little {
                    self.migrate_thread(t, c);
                }
            }
        }
        // phase B: up-migrate busy LITTLE threads
        for (t, &u) in util.iter().enumerate() {
            if self.core_type(self.threads[t].core) != CoreType::Little
                || !self.running_now(t)
                || u <= up
            {
                continue;
            }
            let free_big = (0..self.cores.len())
                .find(|&c| self.core_type(c) == CoreType::Big && self.cores[c].occupant.is_none());
            if let Some(c) = free_big {
                self.migrate_thread(t, c);
                continue;
            }
            let swap_with = (0..team).find(|&v| {
                v != t && self.core_type(self.threads[v].core) == CoreType::Big && util[v] < down
            });
            if let Some(v) = swap_with {
                let big_core = self.threads[v].core;
                let little_core = self.threads[t].core;
                self.migrate_thread(v, little_core);
                self.migrate_thread(t, big_core);
            }
        }
    }

    fn migrate_thread(&mut self, thread: usize, to_core: usize) {
        let cost = Ticks::from_seconds(self.machine.calibration.migration_base_cost_s);
        let from = self.threads[thread].core;
        if from == to_core {
            return;
        }
        self.counts.migrations += 1;
        if self.threads[thread].inflight.is_some() {
            self.retime_inflight(thread, to_core, cost);
        } else if cost > Ticks::ZERO {
            self.threads[thread].delay += cost;
        }
        if self.cores[from].occupant == Some(thread) {
            self.cores[from].occupant = None;
        }
        self.threads[thread].core = to_core;
        self.cores[to_core].occupant = Some(thread);
        if cost > Ticks::ZERO {
            self.charge(
                to_core,
                thread,
                EventKind::Migrate { to_core },
                self.now + cost,
                cost,
            );
        } else {
            self.emit_marker(thread, EventKind::Migrate { to_core });
        }
    }

    fn finish(mut self) -> SimReport {
        let makespan = self.now;
        let cores = self
            .cores
            .iter()
            .enumerate()
            .map(|(id, c)| {
                let ct = self.core_type(id);
                let calib = self.machine.calibration.for_type(ct);
                let busy = c.busy.as_seconds();
                let idle = (makespan - c.busy.min(makespan)).as_seconds();
                CoreReport {
                    id,
                    core_type: ct,
                    busy_s: busy,
                    idle_s: idle,
                    energy_j: busy * calib.active_power_w + idle * calib.idle_power_w,
                }
            })
            .collect::<Vec<_>>();
        let energy: f64 = cores.iter().map(|c| c.energy_j).sum();
        // exchange/migration charges are recorded at their future end time
        // when they are issued; restore time order (stable, so same-time
        // events keep issue order)
        let mut trace = std::mem::take(&mut self.trace);
        trace.sort_by_key(|e| e.t);
        SimReport {
            policy: self.policy.name().to_string(),
            makespan_s: makespan.as_seconds(),
            energy_j: energy,
            cores,
            counts: self.counts,
            steal_stats: self.steal_totals,
            trace,
        }
    }
}

/// Static-schedule ranges for the baseline: contiguous blocks of
/// `ceil(n/T)` by default, round-robin chunks when the source said
/// `schedule(static, k)`.
fn hmp_static_ranges(l: &LoopSim, threads: usize) -> Vec<Vec<(i64, i64)>> {
    let n = l.n_itrs;
    let t = threads as i64;
    match l.hmp_chunk {
        Some(k) if k >= 1 => {
            let mut out = vec![Vec::new(); threads];
            let mut start = 0i64;
            let mut turn = 0usize;
            while start < n {
                out[turn].push((start, (start + k).min(n)));
                start += k;
                turn = (turn + 1) % threads;
            }
            out
        }
        _ => {
            let c = if n == 0 { 0 } else { (n + t - 1) / t };
            (0..t)
                .map(|i| {
                    let lo = (i * c).min(n);
                    let hi = ((i + 1) * c).min(n);
                    vec![(lo, hi)]
                })
                .collect()
        }
    }
}

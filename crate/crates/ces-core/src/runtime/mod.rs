//! The worklist-stealing protocol: per-thread iteration ranges consumed
//! locally and stolen in chunks.
//!
//! `doitr` hands out the owner's next index without a lock while the
//! worklist is private; `getthread` picks the victim with the most
//! iterations left and marks it SHARED, after which every mutation of that
//! worklist goes through its lock. A steal lowers the victim's `end` by
//! `chunk` and the stealer adopts `[newend, end)` as its own range.
//!
//! Two departures from a literal reading of the published pseudo-code, both
//! needed for the exactly-once guarantee:
//!
//! * the owner's locked advance re-checks `itr < end` under the lock (the
//!   unlocked pre-check can be stale once a stealer lowered `end`);
//! * a steal re-validates `end - itr > chunk` under the victim's lock. One
//!   unlocked owner advance may straddle the SHARED store, so the margin of
//!   one iteration keeps the adopted range disjoint from anything the owner
//!   can still consume.
//!
//! All atomics use sequentially consistent ordering; this code is a protocol
//! reference, not a throughput contender.

use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, AtomicU8, Ordering::SeqCst};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::scheduler::IterationDivision;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    InitialPrivate = 0,
    Shared = 1,
    Private = 2,
}

impl Status {
    fn from_u8(v: u8) -> Status {
        match v {
            0 => Status::InitialPrivate,
            1 => Status::Shared,
            _ => Status::Private,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("division covers {got} iterations, worklist needs {expected}")]
    BadDivision { got: i64, expected: i64 },
    #[error("chunk must be at least 1, got {0}")]
    BadChunk(i64),
    #[error("worker thread panicked")]
    WorkerPanic,
}

/// Counters for observability; exported into simulator and CLI reports.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StealStats {
    pub steals_attempted: u64,
    pub steals_succeeded: u64,
    pub iterations_stolen: u64,
    pub lock_acquisitions: u64,
}

#[derive(Default)]
struct StatCells {
    steals_attempted: AtomicU64,
    steals_succeeded: AtomicU64,
    iterations_stolen: AtomicU64,
    lock_acquisitions: AtomicU64,
}

struct Slot {
    itr: AtomicI64,
    end: AtomicI64,
    status: AtomicU8,
    lock: Mutex<()>,
    /// Set once the slot has ever been SHARED; the owner's fast path stays
    /// locked from then on even after the PRIVATE transition.
    ever_shared: AtomicBool,
}

/// What a `doitr` call did, for callers that need more than the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Doitr {
    /// Next index from the caller's own range.
    Local(i64),
    /// The caller stole `[first, first + count)` from `victim` and returns
    /// `first`.
    Stolen {
        first: i64,
        victim: usize,
        count: i64,
    },
    /// No iterations anywhere: the paper's -1.
    Exhausted,
}

impl Doitr {
    pub fn index(self) -> i64 {
        match self {
            Doitr::Local(i) | Doitr::Stolen { first: i, .. } => i,
            Doitr::Exhausted => -1,
        }
    }
}

pub struct Worklist {
    slots: Vec<Slot>,
    chunk: i64,
    n_itrs: i64,
    stats: StatCells,
}

/// `lock_update(var, val, lock)`: acquire the lock, write `val`, return the
/// old value.
pub fn lock_update(var: &AtomicI64, val: i64, lock: &Mutex<()>) -> i64 {
    let _guard = lock.lock().unwrap();
    var.swap(val, SeqCst)
}

impl Worklist {
    /// Build the per-thread ranges from the division: thread `t` owns
    /// `[round(se[t-1]*n), round(se[t]*n))`, all slots INITIAL_PRIVATE.
    pub fn initialize(
        division: &IterationDivision,
        n_itrs: i64,
        chunk: i64,
    ) -> Result<Worklist, RuntimeError> {
        if chunk < 1 {
            return Err(RuntimeError::BadChunk(chunk));
        }
        let ranges = division.ranges(n_itrs);
        let covered: i64 = ranges.iter().map(|(lo, hi)| hi - lo).sum();
        if covered != n_itrs || ranges.iter().any(|&(lo, hi)| lo > hi) {
            return Err(RuntimeError::BadDivision {
                got: covered,
                expected: n_itrs,
            });
        }
        Ok(Worklist {
            slots: ranges
                .iter()
                .map(|&(lo, hi)| Slot {
                    itr: AtomicI64::new(lo),
                    end: AtomicI64::new(hi),
                    status: AtomicU8::new(Status::InitialPrivate as u8),
                    lock: Mutex::new(()),
                    ever_shared: AtomicBool::new(false),
                })
                .collect(),
            chunk,
            n_itrs,
            stats: StatCells::default(),
        })
    }

    pub fn n_threads(&self) -> usize {
        self.slots.len()
    }

    pub fn n_itrs(&self) -> i64 {
        self.n_itrs
    }

    pub fn chunk(&self) -> i64 {
        self.chunk
    }

    pub fn status(&self, t: usize) -> Status {
        Status::from_u8(self.slots[t].status.load(SeqCst))
    }

    pub fn remaining(&self, t: usize) -> i64 {
        let s = &self.slots[t];
        (s.end.load(SeqCst) - s.itr.load(SeqCst)).max(0)
    }

    /// Victim selection: the thread with the most iterations left, if that
    /// remainder exceeds the chunk. Marks the victim SHARED before
    /// returning it; returns `n_threads()` as the no-victim sentinel.
    pub fn getthread(&self) -> usize {
        let mut victim = 0usize;
        let mut best = i64::MIN;
        for (t, _) in self.slots.iter().enumerate() {
            let left = self.remaining(t);
            if left > best {
                best = left;
                victim = t;
            }
        }
        if best > self.chunk {
            self.slots[victim]
                .status
                .store(Status::Shared as u8, SeqCst);
            self.slots[victim].ever_shared.store(true, SeqCst);
            victim
        } else {
            self.n_threads()
        }
    }

    /// The paper's `doitr(t)`: next iteration index for thread `t`, stealing
    /// when the own worklist is exhausted; -1 when nothing is left anywhere.
    pub fn doitr(&self, t: usize) -> i64 {
        self.doitr_outcome(t).index()
    }

    pub fn doitr_outcome(&self, t: usize) -> Doitr {
        loop {
            if let Some(i) = self.advance(t) {
                return Doitr::Local(i);
            }
            self.slots[t].status.store(Status::Private as u8, SeqCst);
            match self.steal(t) {
                StealOutcome::Won {
                    victim,
                    first,
                    count,
                } => {
                    return Doitr::Stolen {
                        // the first stolen index is consumed on the spot
                        first,
                        victim,
                        count,
                    };
                }
                StealOutcome::Retry => continue,
                StealOutcome::Nothing => return Doitr::Exhausted,
            }
        }
    }

    /// Fixed-size variant: private worklist only, no stealing.
    pub fn doitr_nosteal(&self, t: usize) -> i64 {
        match self.advance(t) {
            Some(i) => i,
            None => {
                self.slots[t].status.store(Status::Private as u8, SeqCst);
                -1
            }
        }
    }

    /// Owner advance: unlocked while the slot was never shared, locked (and
    /// re-validated) afterwards.
    fn advance(&self, t: usize) -> Option<i64> {
        let slot = &self.slots[t];
        if !slot.ever_shared.load(SeqCst) {
            let i = slot.itr.load(SeqCst);
            if i < slot.end.load(SeqCst) {
                slot.itr.store(i + 1, SeqCst);
                return Some(i);
            }
            None
        } else {
            let _guard = slot.lock.lock().unwrap();
            self.stats.lock_acquisitions.fetch_add(1, SeqCst);
            let i = slot.itr.load(SeqCst);
            if i < slot.end.load(SeqCst) {
                slot.itr.store(i + 1, SeqCst);
                Some(i)
            } else {
                None
            }
        }
    }

    fn steal(&self, t: usize) -> StealOutcome {
        let victim = self.getthread();
        if victim == self.n_threads() {
            return StealOutcome::Nothing;
        }
        self.stats.steals_attempted.fetch_add(1, SeqCst);
        let vslot = &self.slots[victim];
        let adopted = {
            let _guard = vslot.lock.lock().unwrap();
            self.stats.lock_acquisitions.fetch_add(1, SeqCst);
            let end = vslot.end.load(SeqCst);
            let itr = vslot.itr.load(SeqCst);
            // re-check under the lock; the margin of one iteration covers
            // the owner advance that may straddle the SHARED store
            if end - itr > self.chunk {
                let newend = end - self.chunk;
                vslot.end.store(newend, SeqCst);
                Some((newend, end))
            } else {
                None
            }
        };
        match adopted {
            Some((newend, end)) => {
                let tslot = &self.slots[t];
                let _guard = tslot.lock.lock().unwrap();
                self.stats.lock_acquisitions.fetch_add(1, SeqCst);
                // consume the first stolen index immediately
                tslot.itr.store(newend + 1, SeqCst);
                tslot.end.store(end, SeqCst);
                self.stats.steals_succeeded.fetch_add(1, SeqCst);
                self.stats
                    .iterations_stolen
                    .fetch_add((end - newend) as u64, SeqCst);
                StealOutcome::Won {
                    victim,
                    first: newend,
                    count: end - newend,
                }
            }
            None => StealOutcome::Retry,
        }
    }

    pub fn stats(&self) -> StealStats {
        StealStats {
            steals_attempted: self.stats.steals_attempted.load(SeqCst),
            steals_succeeded: self.stats.steals_succeeded.load(SeqCst),
            iterations_stolen: self.stats.iterations_stolen.load(SeqCst),
            lock_acquisitions: self.stats.lock_acquisitions.load(SeqCst),
        }
    }

    /// All ranges drained, for the no-lost-ranges check.
    pub fn fully_consumed(&self) -> bool {
        (0..self.n_threads()).all(|t| self.remaining(t) == 0)
    }
}

enum StealOutcome {
    Won {
        victim: usize,
        first: i64,
        count: i64,
    },
    Retry,
    Nothing,
}

/// How `run_parallel_for` drives the worklist.
pub enum Executor {
    /// One host thread per worklist slot.
    HostThreads,
    /// Single-threaded round-robin interleaving: thread 0 takes one
    /// iteration, then thread 1, and so on — the schedule a simulator
    /// supplies when it embeds the worklist.
    RoundRobin,
}

/// Result of one parallel-for execution.
pub struct RunOutcome {
    pub stats: StealStats,
    /// Every index handed to the body, sorted.
    pub executed: Vec<i64>,
    /// Indices executed per thread, for scaledend re-balancing.
    pub per_thread: Vec<u64>,
}

/// Execute `body` for every index in `[0, n_itrs)` exactly once.
///
/// `stealing = false` is the fixed-size mode: threads drain their initial
/// ranges and stop. `delay` runs inside each iteration (test hook for
/// stressing interleavings).
pub fn run_parallel_for(
    n_itrs: i64,
    division: &IterationDivision,
    chunk: i64,
    stealing: bool,
    executor: Executor,
    body: &(dyn Fn(usize, i64) + Sync),
) -> Result<RunOutcome, RuntimeError> {
    let w = Worklist::initialize(division, n_itrs, chunk)?;
    let threads = w.n_threads();
    let mut outcome = RunOutcome {
        stats: StealStats::default(),
        executed: Vec::with_capacity(n_itrs.max(0) as usize),
        per_thread: vec![0; threads],
    };
    match executor {
        Executor::HostThreads => {
            let results: Vec<Vec<i64>> = std::thread::scope(|scope| {
                let mut handles = Vec::with_capacity(threads);
                for t in 0..threads {
                    let w = &w;
                    handles.push(scope.spawn(move || {
                        let mut mine = Vec::new();
                        loop {
                            let i = if stealing {
                                w.doitr(t)
                            } else {
                                w.doitr_nosteal(t)
                            };
                            if i < 0 {
                                break;
                            }
                            body(t, i);
                            mine.push(i);
                        }
                        mine
                    }));
                }
                handles
                    .into_iter()
                    .map(|h| h.join().map_err(|_| RuntimeError::WorkerPanic))
                    .collect::<Result<_, _>>()
            })?;
            for (t, mine) in results.into_iter().enumerate() {
                outcome.per_thread[t] = mine.len() as u64;
                outcome.executed.extend(mine);
            }
        }
        Executor::RoundRobin => {
            let mut done = vec![false; threads];
            while !done.iter().all(|&d| d) {
                for (t, d) in done.iter_mut().enumerate() {
                    if *d {
                        continue;
                    }
                    let i = if stealing {
                        w.doitr(t)
                    } else {
                        w.doitr_nosteal(t)
                    };
                    if i < 0 {
                        *d = true;
                    } else {
                        body(t, i);
                        outcome.per_thread[t] += 1;
                        outcome.executed.push(i);
                    }
                }
            }
        }
    }
    outcome.executed.sort_unstable();
    outcome.stats = w.stats();
    Ok(outcome)
}

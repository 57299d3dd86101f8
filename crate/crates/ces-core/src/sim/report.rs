//! Simulation reports, event traces and policy comparisons.

use serde::{Deserialize, Serialize};

use super::time::Ticks;
use crate::runtime::StealStats;
use crate::workload::CoreType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Sequential statement run outside any region.
    Serial,
    /// One work-shared iteration of loop `ordinal`.
    Iter {
        ordinal: usize,
        index: i64,
    },
    /// One statement of a section body.
    SectionStmt {
        section: usize,
        stmt: usize,
    },
    /// A whole section body finished.
    SectionDone {
        section: usize,
    },
    /// One plain-block statement.
    BlockStmt {
        stmt: usize,
    },
    /// Successful steal of `count` iterations from `victim`.
    Steal {
        victim: usize,
        count: i64,
    },
    BarrierArrive {
        sync: usize,
    },
    BarrierRelease {
        sync: usize,
    },
    /// HMP utilization migration onto `to_core`.
    Migrate {
        to_core: usize,
    },
    /// CES thread exchange with `with` at migration point `pt`.
    Exchange {
        with: usize,
        pt: usize,
    },
    /// Progress publish at a minimum-guarantee point.
    Publish {
        pt: usize,
    },
    RegionStart {
        region: usize,
    },
    RegionEnd {
        region: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: Ticks,
    pub core: usize,
    pub thread: usize,
    pub kind: EventKind,
    /// Core-occupying duration that ended at `t` for busy events, zero for
    /// markers.
    pub dur: Ticks,
}

impl TraceEvent {
    pub fn csv_line(&self) -> String {
        let event = match self.kind {
            EventKind::Serial => "serial".to_string(),
            EventKind::Iter { ordinal, index } => format!("iter:{ordinal}:{index}"),
            EventKind::SectionStmt { section, stmt } => format!("secstmt:{section}:{stmt}"),
            EventKind::SectionDone { section } => format!("section:{section}"),
            EventKind::BlockStmt { stmt } => format!("blockstmt:{stmt}"),
            EventKind::Steal { victim, count } => format!("steal:{victim}:{count}"),
            EventKind::BarrierArrive { sync } => format!("barrier_arrive:{sync}"),
            EventKind::BarrierRelease { sync } => format!("barrier_release:{sync}"),
            EventKind::Migrate { to_core } => format!("migrate:{to_core}"),
            EventKind::Exchange { with, pt } => format!("exchange:{with}:{pt}"),
            EventKind::Publish { pt } => format!("publish:{pt}"),
            EventKind::RegionStart { region } => format!("region_start:{region}"),
            EventKind::RegionEnd { region } => format!("region_end:{region}"),
        };
        format!(
            "{},{},{},{}",
            self.t.as_seconds(),
            self.core,
            self.thread,
            event
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreReport {
    pub id: usize,
    #[serde(rename = "type")]
    pub core_type: CoreType,
    pub busy_s: f64,
    pub idle_s: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimCounts {
    pub migrations: u64,
    pub exchanges: u64,
    pub steals_attempted: u64,
    pub steals_succeeded: u64,
    pub iterations_stolen: u64,
    pub barrier_waits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub makespan_s: f64,
    pub energy_j: f64,
    pub cores: Vec<CoreReport>,
    pub counts: SimCounts,
    pub steal_stats: StealStats,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceEvent>,
}

impl SimReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("time,core,thread,event\n");
        for e in &self.trace {
            out.push_str(&e.csv_line());
            out.push('\n');
        }
        out
    }

    /// The multiset of work-shared iteration indices per loop ordinal,
    /// sorted; the cross-check for exactly-once execution.
    pub fn iteration_multiset(&self) -> Vec<(usize, i64)> {
        let mut out: Vec<(usize, i64)> = self
            .trace
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Iter { ordinal, index } => Some((ordinal, index)),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// How many times each section of each sections-segment ran, as
    /// `(segment occurrence, section)` sorted.
    pub fn section_multiset(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .trace
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::SectionDone { section } => Some(section),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Per-core busy time re-derived from event durations; must equal the
    /// accounted busy time.
    pub fn busy_from_trace(&self) -> Vec<f64> {
        let mut busy = vec![Ticks::ZERO; self.cores.len()];
        for e in &self.trace {
            busy[e.core] += e.dur;
        }
        busy.into_iter().map(|t| t.as_seconds()).collect()
    }
}

/// Side-by-side policy comparison with HMP-normalized columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub benchmark: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub time_s: f64,
    pub energy_j: f64,
    pub time_normalized: f64,
    pub energy_normalized: f64,
}

impl ComparisonReport {
    pub fn from_reports(benchmark: &str, reports: &[SimReport]) -> ComparisonReport {
        let baseline = reports
            .iter()
            .find(|r| r.policy == "hmp")
            .or(reports.first());
        let (bt, be) = baseline
            .map(|b| (b.makespan_s, b.energy_j))
            .unwrap_or((1.0, 1.0));
        ComparisonReport {
            benchmark: benchmark.to_string(),
            rows: reports
                .iter()
                .map(|r| ComparisonRow {
                    policy: r.policy.clone(),
                    time_s: r.makespan_s,
                    energy_j: r.energy_j,
                    time_normalized: if bt > 0.0 { r.makespan_s / bt } else { 1.0 },
                    energy_normalized: if be > 0.0 { r.energy_j / be } else { 1.0 },
                })
                .collect(),
        }
    }

    /// Aligned text table: BM / policy / Time / Energy plus normalized columns.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:<8} {:>14} {:>14} {:>12} {:>12}\n",
            "BM", "policy", "Time (s)", "Energy (J)", "Time (norm)", "Energy (norm)"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<12} {:<8} {:>14.6} {:>14.6} {:>12.4} {:>12.4}\n",
                self.benchmark,
                row.policy,
                row.time_s,
                row.energy_j,
                row.time_normalized,
                row.energy_normalized
            ));
        }
        out
    }

    /// `benchmark,policy,time_s,energy_j,time_norm,energy_norm` lines.
    pub fn normalized_csv(&self) -> String {
        let mut out = String::from("benchmark,policy,time_s,energy_j,time_norm,energy_norm\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.benchmark,
                row.policy,
                row.time_s,
                row.energy_j,
                row.time_normalized,
                row.energy_normalized
            ));
        }
        out
    }
}

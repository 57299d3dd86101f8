//! Deterministic discrete-event simulation of a big.LITTLE machine running
//! a scheduled program under the CES plans or the utilization-driven HMP
//! baseline.

pub mod build;
pub mod engine;
pub mod recognize;
pub mod report;
pub mod time;

pub use build::SimError;
pub use engine::{Policy, SimOptions};
pub use recognize::recognize_transformed;
pub use report::{ComparisonReport, EventKind, SimReport, TraceEvent};
pub use time::Ticks;

use crate::machine::MachineConfig;
use crate::plan::Analysis;

/// Simulate an analyzed program on a machine under one policy.
pub fn simulate(
    analysis: &Analysis,
    machine: &MachineConfig,
    opts: &SimOptions,
) -> Result<SimReport, SimError> {
    let program = build::build_program(analysis)?;
    engine::run(&program, machine, opts)
}

/// Run the same program under several policies and normalize against the
/// HMP baseline.
pub fn compare(
    analysis: &Analysis,
    machine: &MachineConfig,
    benchmark: &str,
    policies: &[Policy],
) -> Result<(Vec<SimReport>, ComparisonReport), SimError> {
    let mut reports = Vec::new();
    for &policy in policies {
        let opts = SimOptions {
            policy,
            ..SimOptions::default()
        };
        reports.push(simulate(analysis, machine, &opts)?);
    }
    let comparison = ComparisonReport::from_reports(benchmark, &reports);
    Ok((reports, comparison))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::frontend::{parse, SourceProgram};
    use crate::plan::analyze_program;
    use crate::workload::calib::CoreCalib;
    use crate::workload::CoreType;

    fn analyze_src(src: &str, machine: &MachineConfig) -> Analysis {
        let ast = parse(&SourceProgram::new("t.comp.c", src)).expect("parse");
        analyze_program(&ast, machine, None).expect("analyze")
    }

    fn analyze_corpus(name: &str, machine: &MachineConfig) -> Analysis {
        analyze_src(corpus::get(name).expect("corpus entry").source, machine)
    }

    fn run_policy(analysis: &Analysis, machine: &MachineConfig, policy: Policy) -> SimReport {
        simulate(
            analysis,
            machine,
            &SimOptions {
                policy,
                ..SimOptions::default()
            },
        )
        .expect("simulation")
    }

    #[test]
    fn figure2_hmp_makespan_is_16() {
        let machine = MachineConfig::figure2();
        let a = analyze_corpus("fig2_like", &machine);
        let r = run_policy(&a, &machine, Policy::Hmp);
        assert!(
            (r.makespan_s - 16.0).abs() < 1e-9,
            "HMP makespan {}",
            r.makespan_s
        );
        assert_eq!(r.counts.migrations, 4, "two swaps at t1");
        assert_eq!(
            r.iteration_multiset(),
            (0..100).map(|i| (1, i)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn figure2_ces_makespan_is_14_4() {
        let machine = MachineConfig::figure2();
        let a = analyze_corpus("fig2_like", &machine);
        let r = run_policy(&a, &machine, Policy::Ces);
        assert!(
            (r.makespan_s - 14.4).abs() < 1e-9,
            "CES makespan {}",
            r.makespan_s
        );
        assert_eq!(r.steal_stats.steals_attempted, 0);
        assert_eq!(
            r.iteration_multiset(),
            (0..100).map(|i| (1, i)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn single_core_runs_serially() {
        let mut machine = MachineConfig::figure2();
        machine.cores.truncate(1); // one big core at 2.5 ops/s
        let src = "void main() {\n int i; double s;\n #pragma omp parallel num_threads(1)\n {\n #pragma omp for\n for (i = 0; i < 10; i++) { s = s + 1.0; }\n }\n}";
        let a = analyze_src(src, &machine);
        let r = run_policy(&a, &machine, Policy::Ces);
        assert!((r.makespan_s - 10.0 * 0.4).abs() < 1e-9, "{}", r.makespan_s);
    }

    #[test]
    fn hmp_up_migrates_busy_little_thread_to_free_big() {
        // 2 threads on a 2-big + 1-little machine, thread on little is busy
        let mut machine = MachineConfig::figure2();
        machine.cores = vec![
            crate::machine::CoreSpec {
                core_type: CoreType::Big,
                frequency_hz: None,
            },
            crate::machine::CoreSpec {
                core_type: CoreType::Little,
                frequency_hz: None,
            },
            crate::machine::CoreSpec {
                core_type: CoreType::Big,
                frequency_hz: None,
            },
        ];
        let src = "void main() {\n int i; double s;\n #pragma omp parallel num_threads(2)\n {\n #pragma omp for\n for (i = 0; i < 20; i++) { s = s + 1.0; }\n }\n}";
        let a = analyze_src(src, &machine);
        let r = run_policy(&a, &machine, Policy::Hmp);
        assert!(
            r.counts.migrations >= 1,
            "busy little thread moves to the free big core"
        );
    }

    #[test]
    fn hmp_down_migrates_idle_big_thread() {
        // thread 1 finishes early and vacates its big core to the free little
        let mut machine = MachineConfig::figure2();
        machine.cores = vec![
            crate::machine::CoreSpec {
                core_type: CoreType::Big,
                frequency_hz: None,
            },
            crate::machine::CoreSpec {
                core_type: CoreType::Big,
                frequency_hz: None,
            },
            crate::machine::CoreSpec {
                core_type: CoreType::Little,
                frequency_hz: None,
            },
        ];
        // two sections of very different size, no balancing possible
        let src = "void main() {\n int i; int j; double s; double q;\n #pragma omp parallel num_threads(2)\n {\n #pragma omp sections\n {\n #pragma omp section\n {\n for (i = 0; i < 1000; i++) { s = s + 1.0; }\n }\n #pragma omp section\n {\n for (j = 0; j < 10; j++) { q = q + 1.0; }\n }\n }\n }\n}";
        let a = analyze_src(src, &machine);
        let r = run_policy(&a, &machine, Policy::Hmp);
        assert!(r.counts.migrations >= 1, "idle big thread down-migrates");
    }

    #[test]
    fn symmetric_machine_sees_no_hmp_migrations() {
        let mut machine = MachineConfig::figure2();
        for c in machine.cores.iter_mut() {
            c.core_type = CoreType::Big;
        }
        let a = analyze_corpus("fig2_like", &machine);
        let r = run_policy(&a, &machine, Policy::Hmp);
        assert_eq!(r.counts.migrations, 0);
    }

    #[test]
    fn policies_agree_on_symmetric_machine_with_equal_division() {
        let mut machine = MachineConfig::figure2();
        for c in machine.cores.iter_mut() {
            c.core_type = CoreType::Big;
        }
        let a = analyze_corpus("fig2_like", &machine);
        let hmp = run_policy(&a, &machine, Policy::Hmp);
        let ces = run_policy(&a, &machine, Policy::Ces);
        assert!((hmp.makespan_s - ces.makespan_s).abs() < 1e-12);
    }

    #[test]
    fn energy_accounting_closes() {
        let machine = MachineConfig::figure2();
        let a = analyze_corpus("fig2_like", &machine);
        for policy in [Policy::Hmp, Policy::Ces] {
            let r = run_policy(&a, &machine, policy);
            for c in &r.cores {
                assert!(
                    (c.busy_s + c.idle_s - r.makespan_s).abs() < 1e-12,
                    "busy+idle = makespan on core {}",
                    c.id
                );
            }
            let from_trace = r.busy_from_trace();
            for (c, &bt) in r.cores.iter().zip(from_trace.iter()) {
                let denom = c.busy_s.max(1e-30);
                assert!(
                    ((c.busy_s - bt) / denom).abs() < 1e-9,
                    "core {} accounted busy {} vs trace {}",
                    c.id,
                    c.busy_s,
                    bt
                );
            }
            let recomputed: f64 = r
                .cores
                .iter()
                .map(|c| {
                    let calib = machine.calibration.for_type(c.core_type);
                    c.busy_s * calib.active_power_w + c.idle_s * calib.idle_power_w
                })
                .sum();
            assert!(((r.energy_j - recomputed) / recomputed.max(1e-30)).abs() < 1e-9);
        }
    }

    #[test]
    fn barrier_holds_back_post_barrier_work() {
        // the loop's trailing barrier separates iterations from the block
        // statement: no thread may start it before the last iteration ends
        let machine = MachineConfig::figure2();
        let src = "void main() {\n int i; int j; double s; double q;\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < 7; i++) { s = s + 1.0; }\n q = 1.0 + 1.0;\n }\n}";
        let a = analyze_src(src, &machine);
        let r = run_policy(&a, &machine, Policy::Ces);
        let last_iter = r
            .trace
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Iter { .. }))
            .map(|e| e.t)
            .max()
            .expect("iterations exist");
        let mut saw_block = false;
        for e in &r.trace {
            if matches!(e.kind, EventKind::BlockStmt { .. }) {
                saw_block = true;
                assert!(
                    e.t - e.dur >= last_iter,
                    "post-barrier work started before the barrier released"
                );
            }
        }
        assert!(saw_block);
    }

    #[test]
    fn determinism_byte_identical_traces() {
        let machine = MachineConfig::figure2();
        let a = analyze_corpus("fig2_like", &machine);
        for policy in [Policy::Hmp, Policy::Ces] {
            let r1 = run_policy(&a, &machine, policy);
            let r2 = run_policy(&a, &machine, policy);
            assert_eq!(r1.trace_csv(), r2.trace_csv());
        }
    }

    #[test]
    fn ep_like_ces_beats_hmp_on_default_machine() {
        let machine = MachineConfig::default();
        let a = analyze_corpus("ep_like", &machine);
        let hmp = run_policy(&a, &machine, Policy::Hmp);
        let ces = run_policy(&a, &machine, Policy::Ces);
        assert!(
            ces.makespan_s < hmp.makespan_s,
            "ces {} vs hmp {}",
            ces.makespan_s,
            hmp.makespan_s
        );
        let n = 8192;
        assert_eq!(ces.iteration_multiset().len(), n);
        assert_eq!(hmp.iteration_multiset().len(), n);
    }

    #[test]
    fn skewed_division_steals_inside_the_simulator() {
        // force everything onto thread 0; the other threads must steal it
        // back chunk by chunk, and every index still runs exactly once
        let machine = MachineConfig::default();
        let mut a = analyze_corpus("ep_like", &machine);
        for r in &mut a.regions {
            for s in &mut r.segments {
                if let crate::plan::SegmentPlan::For(p) = &mut s.plan {
                    let mut counts = vec![0i64; r.n_threads];
                    counts[0] = 8192;
                    p.division = crate::scheduler::IterationDivision::from_counts(&counts);
                }
            }
        }
        let r = run_policy(&a, &machine, Policy::Ces);
        assert!(r.steal_stats.steals_succeeded > 0, "steals must occur");
        assert_eq!(
            r.iteration_multiset(),
            (0..8192).map(|i| (1, i)).collect::<Vec<_>>()
        );
        assert!(r.steal_stats.iterations_stolen <= 8192);
    }

    #[test]
    fn is_like_fixed_size_has_no_steal_attempts_and_full_coverage() {
        let machine = MachineConfig::default();
        let a = analyze_corpus("is_like", &machine);
        let r = run_policy(&a, &machine, Policy::Ces);
        assert_eq!(r.steal_stats.steals_attempted, 0);
        assert_eq!(
            r.iteration_multiset(),
            (0..65536).map(|i| (1, i)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn cg_like_replays_regions_and_rebalances() {
        let machine = MachineConfig::default();
        let a = analyze_corpus("cg_like", &machine);
        let r = run_policy(&a, &machine, Policy::Ces);
        // four instances of the same loop: every index appears four times
        let multiset = r.iteration_multiset();
        assert_eq!(multiset.len(), 4 * 20000);
        assert_eq!(
            r.trace
                .iter()
                .filter(|e| matches!(e.kind, EventKind::RegionStart { .. }))
                .count(),
            4
        );
    }

    #[test]
    fn sections_execute_exactly_once_under_both_policies() {
        let machine = MachineConfig::default();
        let a = analyze_corpus("sec_like", &machine);
        for policy in [Policy::Hmp, Policy::Ces] {
            let r = run_policy(&a, &machine, policy);
            assert_eq!(r.section_multiset(), (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn mig_like_exchange_strictly_improves_makespan() {
        let machine = MachineConfig::default();
        let a = analyze_corpus("mig_like", &machine);
        let with_exchange = run_policy(&a, &machine, Policy::Ces);
        assert!(with_exchange.counts.exchanges >= 1, "plan must trigger");

        // same program with the pairs suppressed by an unaffordable cost
        let mut expensive = machine.clone();
        expensive.calibration.migration_base_cost_s = 10.0;
        let a_no = analyze_corpus("mig_like", &expensive);
        expensive.calibration.migration_base_cost_s = 0.0;
        let without = run_policy(&a_no, &expensive, Policy::Ces);
        assert_eq!(without.counts.exchanges, 0);
        assert!(
            with_exchange.makespan_s < without.makespan_s,
            "exchange {} vs plain {}",
            with_exchange.makespan_s,
            without.makespan_s
        );
    }

    #[test]
    fn victim_that_never_passes_mgp_blocks_the_exchange() {
        // invert the machine: "big" cores are much slower, so no big-hosted
        // thread reaches the guarantee point before the attackers pass mp
        let machine = MachineConfig::default();
        let a = analyze_corpus("mig_like", &machine);
        let mut inverted = machine.clone();
        inverted.calibration.big.frequency_hz = 0.05e9;
        let r = run_policy(&a, &inverted, Policy::Ces);
        assert_eq!(r.counts.exchanges, 0, "no victim qualifies at scan time");
    }

    #[test]
    fn trace_is_monotone_in_time() {
        // exchange stalls are charged at future end times; the report must
        // still come out time-ordered
        let machine = MachineConfig::default();
        let a = analyze_corpus("mig_like", &machine);
        let r = run_policy(&a, &machine, Policy::Ces);
        assert!(r.counts.exchanges >= 1);
        for pair in r.trace.windows(2) {
            assert!(pair[0].t <= pair[1].t, "{:?} then {:?}", pair[0], pair[1]);
        }
    }

    #[test]
    fn region_in_else_branch_keeps_plan_alignment() {
        // the analyzer plans both branches; the simulator runs the then-path
        // and must skip the else-branch's region analyses, so the region
        // after the if still gets its own plan (100 iterations, not 7)
        let machine = MachineConfig::figure2();
        let src = "void main() {\n int flag; int i; double s;\n flag = 1;\n if (flag > 0) {\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < 40; i++) { s = s + 1.0; }\n }\n } else {\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < 7; i++) { s = s + 1.0; }\n }\n }\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < 100; i++) { s = s + 1.0; }\n }\n}";
        let a = analyze_src(src, &machine);
        assert_eq!(a.regions.len(), 3);
        let r = run_policy(&a, &machine, Policy::Ces);
        let mut per_loop = std::collections::BTreeMap::new();
        for (ordinal, _) in r.iteration_multiset() {
            *per_loop.entry(ordinal).or_insert(0usize) += 1;
        }
        assert_eq!(per_loop.get(&1), Some(&40), "then-branch loop runs");
        assert_eq!(per_loop.get(&2), None, "else-branch loop is not taken");
        assert_eq!(per_loop.get(&3), Some(&100), "trailing region keeps its own plan");
    }

    #[test]
    fn hmp_honors_static_chunk_interleaving() {
        // schedule(static, 1) hands iteration k to thread k mod T
        let machine = MachineConfig::figure2();
        let src = "void main() {\n int i; double s;\n #pragma omp parallel num_threads(4)\n {\n #pragma omp for schedule(static, 1)\n for (i = 0; i < 12; i++) { s = s + 1.0; }\n }\n}";
        let a = analyze_src(src, &machine);
        let r = run_policy(&a, &machine, Policy::Hmp);
        for e in &r.trace {
            if let EventKind::Iter { index, .. } = e.kind {
                assert_eq!(
                    index as usize % 4,
                    e.thread,
                    "iteration {index} ran on thread {}",
                    e.thread
                );
            }
        }
        assert_eq!(r.iteration_multiset().len(), 12);
    }

    #[test]
    fn empty_migration_plan_leaves_trace_unchanged() {
        let machine = MachineConfig::default();
        let src = "void main() {\n int k; double s;\n #pragma omp parallel\n {\n for (k = 0; k < 100; k++) { s = s + 1.0; }\n }\n}";
        let a = analyze_src(src, &machine);
        let r = run_policy(&a, &machine, Policy::Ces);
        assert_eq!(r.counts.exchanges, 0);
        assert!(r.trace.iter().all(|e| !matches!(
            e.kind,
            EventKind::Exchange { .. } | EventKind::Publish { .. }
        )));
    }

    #[test]
    fn identical_policy_runs_produce_identical_reports() {
        let machine = MachineConfig::default();
        let a = analyze_corpus("ep_like", &machine);
        let (reports, comparison) =
            compare(&a, &machine, "ep_like", &[Policy::Ces, Policy::Ces]).expect("compare");
        assert_eq!(reports[0], reports[1]);
        assert_eq!(
            comparison.rows[0].time_normalized,
            comparison.rows[1].time_normalized
        );
    }

    #[test]
    fn transformed_program_simulates_to_the_same_multisets() {
        let machine = MachineConfig::default();
        for name in ["figc_like", "ep_like", "is_like", "sec_like"] {
            let a = analyze_corpus(name, &machine);
            let direct = run_policy(&a, &machine, Policy::Ces);

            let text = crate::transform::transform_program(&a).expect("transform");
            let re = parse(&SourceProgram::new("t.ces.c", &text)).expect("reparse");
            let recog = recognize_transformed(&re, &machine)
                .expect("recognize")
                .expect("is transformed");
            let via_transform = run_policy(&recog, &machine, Policy::Ces);

            assert_eq!(
                direct.iteration_multiset().len(),
                via_transform.iteration_multiset().len(),
                "kernel {name}"
            );
            match name {
                // sections turn into a dispatch loop: compare executed sections
                "sec_like" => assert_eq!(
                    direct.section_multiset(),
                    via_transform
                        .trace
                        .iter()
                        .filter_map(|e| match e.kind {
                            EventKind::SectionDone { section } => Some(section),
                            _ => None,
                        })
                        .collect::<Vec<_>>()
                        .tap_sort(),
                ),
                _ => assert_eq!(
                    direct.iteration_multiset(),
                    via_transform.iteration_multiset(),
                    "kernel {name}"
                ),
            }
        }
    }

    trait TapSort {
        fn tap_sort(self) -> Self;
    }
    impl TapSort for Vec<usize> {
        fn tap_sort(mut self) -> Self {
            self.sort_unstable();
            self
        }
    }

    /// Calibration used by several scenario tests: iteration speeds 2.5 : 1.
    #[allow(dead_code)]
    fn unit_calib() -> crate::workload::CalibrationTable {
        crate::workload::CalibrationTable {
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

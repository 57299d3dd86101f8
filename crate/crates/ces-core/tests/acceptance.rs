//! Acceptance suite: the model-level reproductions and property checks the
//! toolkit must satisfy. Each test prints one `ACCEPT <n> PASS` line; run
//! with `cargo test --test acceptance -- --nocapture` to see them.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ces_core::corpus;
use ces_core::frontend::{emit_source, parse, SourceProgram};
use ces_core::machine::MachineConfig;
use ces_core::plan::{analyze_program, Analysis, SegmentPlan};
use ces_core::runtime::{run_parallel_for, Executor};
use ces_core::scheduler::{divide_counts, IterationDivision};
use ces_core::sim::{self, Policy, SimOptions};
use ces_core::transform::transform_program;
use ces_core::workload::{estimate, CalibrationTable, CoreType, OpCounts};

fn analyze_corpus(name: &str, machine: &MachineConfig) -> Analysis {
    let entry = corpus::get(name).expect("corpus entry");
    let ast =
        parse(&SourceProgram::new(format!("{name}.comp.c"), entry.source)).expect("corpus parses");
    analyze_program(&ast, machine, None).expect("corpus analyzes")
}

fn run_policy(analysis: &Analysis, machine: &MachineConfig, policy: Policy) -> sim::SimReport {
    sim::simulate(
        analysis,
        machine,
        &SimOptions {
            policy,
            ..SimOptions::default()
        },
    )
    .expect("simulation succeeds")
}

/// Criterion 1: the worked scenario. 2 big (speed 2.5) + 2 LITTLE (speed 1),
/// 100 unit iterations, zero overheads: HMP finishes at 16.0, the CES
/// division at 14.4 (>= 10% better), both exact to 1e-9, in under a second.
#[test]
fn criterion_1_figure2_reproduction() {
    let started = Instant::now();
    let machine = MachineConfig::figure2();
    let analysis = analyze_corpus("fig2_like", &machine);

    let hmp = run_policy(&analysis, &machine, Policy::Hmp);
    let ces = run_policy(&analysis, &machine, Policy::Ces);

    assert!(
        (hmp.makespan_s - 16.0).abs() < 1e-9,
        "HMP makespan {} != 16.0",
        hmp.makespan_s
    );
    assert!(
        (ces.makespan_s - 14.4).abs() < 1e-9,
        "CES makespan {} != 14.4",
        ces.makespan_s
    );
    let improvement = (hmp.makespan_s - ces.makespan_s) / hmp.makespan_s;
    assert!(improvement >= 0.10 - 1e-12, "improvement {improvement}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "ACCEPT 1 PASS figure-2 reproduction: hmp 16.0, ces 14.4, improvement {:.1}% in {elapsed:?}",
        improvement * 100.0
    );
}

/// Criterion 2: exactly-once stealing under real host threads across >= 200
/// randomized configurations in under a minute.
#[test]
fn criterion_2_exactly_once_stealing() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut configs = 0usize;

    for round in 0..210 {
        let threads = rng.gen_range(1..=8usize);
        let n: i64 = match round % 21 {
            0 => rng.gen_range(20_000..=100_000),
            1..=4 => rng.gen_range(2_000..=20_000),
            _ => rng.gen_range(0..=2_000),
        };
        // random division: cut points over [0, n]
        let mut cuts: Vec<i64> = (0..threads - 1).map(|_| rng.gen_range(0..=n)).collect();
        cuts.sort_unstable();
        let mut counts = Vec::with_capacity(threads);
        let mut prev = 0;
        for c in cuts {
            counts.push(c - prev);
            prev = c;
        }
        counts.push(n - prev);
        let division = IterationDivision::from_counts(&counts);
        let chunk = *[1i64, 2, 10].get(rng.gen_range(0..3)).unwrap();
        let delays: Vec<u32> = (0..threads).map(|_| rng.gen_range(0..32)).collect();

        let outcome = run_parallel_for(
            n,
            &division,
            chunk,
            true,
            Executor::HostThreads,
            &move |t, _| {
                for _ in 0..delays[t] {
                    std::hint::spin_loop();
                }
            },
        )
        .expect("run");
        assert_eq!(
            outcome.executed,
            (0..n).collect::<Vec<i64>>(),
            "round {round}: threads {threads} n {n} chunk {chunk} division {counts:?}"
        );
        assert!(outcome.stats.steals_succeeded <= outcome.stats.steals_attempted);
        assert!(outcome.stats.iterations_stolen <= n.max(0) as u64);
        configs += 1;
    }

    let elapsed = started.elapsed();
    assert!(configs >= 200);
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("ACCEPT 2 PASS exactly-once stealing: {configs} randomized configs in {elapsed:?}");
}

/// Criterion 3: the iteration division matches the brute-force-minimal
/// imbalance over all integer compositions, for n <= 24, threads <= 4 and
/// three calibration settings, in under 30 s.
#[test]
fn criterion_3_division_oracle_equivalence() {
    let started = Instant::now();

    let mut symmetric = CalibrationTable::default();
    symmetric.little = symmetric.big.clone();

    let mut skewed = CalibrationTable::default();
    skewed.big.frequency_hz = 2.0e9;
    skewed.big.cycles_per_mem = 2.0;
    skewed.little.frequency_hz = 0.5e9;
    skewed.little.cycles_per_alu = 4.0;
    skewed.little.cycles_per_mem = 3.0;

    let settings: [(&str, CalibrationTable, OpCounts); 3] = [
        (
            "default",
            CalibrationTable::default(),
            OpCounts::new(5, 3, 1),
        ),
        ("symmetric", symmetric, OpCounts::new(2, 1, 1)),
        ("skewed", skewed, OpCounts::new(1, 4, 2)),
    ];
    let teams: [&[CoreType]; 4] = [
        &[CoreType::Big],
        &[CoreType::Big, CoreType::Little],
        &[CoreType::Big, CoreType::Little, CoreType::Little],
        &[
            CoreType::Big,
            CoreType::Big,
            CoreType::Little,
            CoreType::Little,
        ],
    ];

    let mut cases = 0usize;
    for (name, calib, iter_counts) in &settings {
        for team in teams {
            let times: Vec<f64> = team
                .iter()
                .map(|&ct| estimate(iter_counts, ct, calib).total())
                .collect();
            for n in 0..=24i64 {
                let got = divide_counts(n, team, iter_counts, calib);
                let got_im = imbalance_of(&got, &times);
                let best_im = brute_force_min_imbalance(n, &times);
                assert!(
                    (got_im - best_im).abs() <= 1e-12 * best_im.max(1.0),
                    "{name} team {team:?} n {n}: division {got:?} im {got_im} vs optimal {best_im}"
                );
                cases += 1;
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "ACCEPT 3 PASS division oracle equivalence: {cases} cases across 3 calibrations in {elapsed:?}"
    );
}

fn imbalance_of(counts: &[i64], times: &[f64]) -> f64 {
    let wl: Vec<f64> = counts
        .iter()
        .zip(times)
        .map(|(&c, &t)| c as f64 * t)
        .collect();
    let max = wl.iter().cloned().fold(f64::MIN, f64::max);
    let min = wl.iter().cloned().fold(f64::MAX, f64::min);
    max - min
}

/// Exhaustive enumeration of all compositions of `n` into `times.len()`
/// non-negative parts — the independent oracle.
fn brute_force_min_imbalance(n: i64, times: &[f64]) -> f64 {
    fn rec(i: usize, left: i64, acc: &mut Vec<i64>, times: &[f64], best: &mut f64) {
        if i == times.len() - 1 {
            acc.push(left);
            let im = imbalance_of(acc, times);
            if im < *best {
                *best = im;
            }
            acc.pop();
            return;
        }
        for c in 0..=left {
            acc.push(c);
            rec(i + 1, left - c, acc, times, best);
            acc.pop();
        }
    }
    let mut best = f64::MAX;
    rec(0, n, &mut Vec::new(), times, &mut best);
    best
}

/// Criterion 4: randomized section sets — the rewritten loop has
/// N_ITRS = max-per-thread * N_THREADS, every section executes exactly once
/// in simulation, and normalization never increases the imbalance.
#[test]
fn criterion_4_sections_n_itrs_formula() {
    let machine = MachineConfig::default();
    let team = machine.core_types();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC5);

    for round in 0..30 {
        let k = rng.gen_range(1..=12usize);
        let mut src = String::from("void main() {\n");
        for s in 0..k {
            src.push_str(&format!("  int i{s};\n  int c{s};\n  double o{s}[512];\n"));
        }
        src.push_str("  #pragma omp parallel\n  {\n    #pragma omp sections\n    {\n");
        for s in 0..k {
            let iters = rng.gen_range(100..5000);
            if rng.gen_bool(0.5) {
                // ALU-leaning body
                src.push_str(&format!(
                    "      #pragma omp section\n      {{ for (i{s} = 0; i{s} < {iters}; i{s}++) {{ c{s} = c{s} + i{s} * 3; }} }}\n"
                ));
            } else {
                // memory-leaning body
                src.push_str(&format!(
                    "      #pragma omp section\n      {{ for (i{s} = 0; i{s} < {iters}; i{s}++) {{ o{s}[i{s} % 512] = o{s}[i{s} % 512] + 1.0; }} }}\n"
                ));
            }
        }
        src.push_str("    }\n  }\n}\n");

        let ast = parse(&SourceProgram::new("gen.comp.c", &src)).expect("generated source parses");
        let analysis = analyze_program(&ast, &machine, None).expect("analyze");
        let seg = &analysis.regions[0].segments[0];
        let assignment = match &seg.plan {
            SegmentPlan::Sections(a) => a.clone(),
            other => panic!("expected sections plan, got {other:?}"),
        };
        assert_eq!(
            assignment.n_itrs(),
            assignment.max_per_thread * team.len(),
            "round {round}"
        );
        for pair in assignment.wl_im_trace.windows(2) {
            assert!(
                pair[1] < pair[0],
                "round {round}: accepted normalization move increased wl_im: {:?}",
                assignment.wl_im_trace
            );
        }

        // the transformed loop bound carries the same N_ITRS
        let text = transform_program(&analysis).expect("transform");
        assert!(
            text.contains(&format!("secitr < {}", assignment.n_itrs())),
            "round {round}:\n{text}"
        );

        // each section runs exactly once in simulation
        let report = run_policy(&analysis, &machine, Policy::Ces);
        assert_eq!(
            report.section_multiset(),
            (0..k).collect::<Vec<_>>(),
            "round {round}"
        );
    }
    println!("ACCEPT 4 PASS sections N_ITRS formula on 30 randomized section sets");
}

/// Criterion 5: on the mixed-affinity corpus kernel every ALU-heavy section
/// lands on a big core, and the CES energy beats at least 95 of 100 seeded
/// arbitrary assignments simulated under the baseline.
#[test]
fn criterion_5_sections_affinity_direction() {
    let machine = MachineConfig::default();
    let analysis = analyze_corpus("sec_like", &machine);
    let team = machine.core_types();

    let seg = &analysis.regions[0].segments[0];
    let assignment = match &seg.plan {
        SegmentPlan::Sections(a) => a.clone(),
        other => panic!("expected sections plan, got {other:?}"),
    };
    // even ordinals are the prime-like (ALU-heavy) sections
    for (s, &thread) in assignment.assignment.iter().enumerate() {
        if s % 2 == 0 {
            assert_eq!(
                team[thread],
                CoreType::Big,
                "prime-like section {s} landed on thread {thread}"
            );
        }
    }

    let ces = run_policy(&analysis, &machine, Policy::Ces);

    let mut rng = ChaCha8Rng::seed_from_u64(0xCE5);
    let mut beaten = 0usize;
    for _ in 0..100 {
        let arbitrary: Vec<usize> = (0..8).map(|_| rng.gen_range(0..team.len())).collect();
        let report = sim::simulate(
            &analysis,
            &machine,
            &SimOptions {
                policy: Policy::Hmp,
                seed: 0,
                hmp_sections_assignment: Some(arbitrary),
            },
        )
        .expect("simulate");
        if ces.energy_j < report.energy_j {
            beaten += 1;
        }
    }
    assert!(
        beaten >= 95,
        "CES energy {} beat only {beaten}/100 arbitrary assignments",
        ces.energy_j
    );
    println!(
        "ACCEPT 5 PASS sections affinity: primes on big, CES energy beats {beaten}/100 arbitrary assignments"
    );
}

/// Criterion 6: a thread exchange is planned exactly when the estimated
/// imbalance reduction exceeds the exchange cost, and enabling it strictly
/// lowers the simulated makespan.
#[test]
fn criterion_6_migration_guard() {
    let machine = MachineConfig::default();
    let analysis = analyze_corpus("mig_like", &machine);

    let plan = analysis.regions[0]
        .segments
        .iter()
        .find_map(|s| match &s.plan {
            SegmentPlan::Block(p) if !p.is_empty() => Some(p.clone()),
            _ => None,
        })
        .expect("mig_like plans an exchange");
    for pair in &plan.pairs {
        assert!(pair.c_ex_s > 0.0);
    }

    // the guard refuses the pair when the exchange cost dwarfs the gain
    let mut expensive = machine.clone();
    expensive.calibration.migration_base_cost_s = 10.0;
    let no_plan = analyze_corpus("mig_like", &expensive);
    for seg in &no_plan.regions[0].segments {
        if let SegmentPlan::Block(p) = &seg.plan {
            assert!(p.is_empty(), "guard must reject unaffordable exchanges");
        }
    }

    // strict improvement against the same program with pairs stripped
    let with_exchange = run_policy(&analysis, &machine, Policy::Ces);
    assert!(with_exchange.counts.exchanges >= 1);
    let mut stripped = analysis.clone();
    for r in &mut stripped.regions {
        for s in &mut r.segments {
            if let SegmentPlan::Block(p) = &mut s.plan {
                p.pairs.clear();
            }
        }
    }
    let without = run_policy(&stripped, &machine, Policy::Ces);
    assert_eq!(without.counts.exchanges, 0);
    assert!(
        with_exchange.makespan_s < without.makespan_s,
        "exchange {} vs no-exchange {}",
        with_exchange.makespan_s,
        without.makespan_s
    );
    println!(
        "ACCEPT 6 PASS migration guard: planned pairs only when reduction > c_ex; makespan {:.6} < {:.6}",
        with_exchange.makespan_s, without.makespan_s
    );
}

/// Criterion 7: parse . emit is the identity on the whole corpus, and the
/// "initial loop" kernel transforms into the worklist structure byte-stably.
#[test]
fn criterion_7_roundtrip_and_golden_transform() {
    for entry in &corpus::CORPUS {
        let sp = SourceProgram::new(format!("{}.comp.c", entry.name), entry.source);
        let ast = parse(&sp).expect("corpus parses");
        let printed = emit_source(&ast);
        let reparsed = parse(&SourceProgram::new("rt", &printed)).expect("printed re-parses");
        assert_eq!(ast, reparsed, "round-trip identity on {}", entry.name);
        assert_eq!(printed, emit_source(&reparsed), "byte-stable print");
    }

    let machine = MachineConfig::default();
    let analysis = analyze_corpus("figc_like", &machine);
    let first = transform_program(&analysis).expect("transform");
    let second = transform_program(&analyze_corpus("figc_like", &machine)).expect("transform");
    assert_eq!(first, second, "transform must be byte-stable across runs");

    let init = first.find("initialize(1, 100, ").expect("initialize call");
    let barrier1 = first.find("#pragma omp barrier").expect("entry barrier");
    let consume = first
        .find("while ((i = doitr(tid)) != -1)")
        .expect("guarded consumption loop");
    let barrier2 = first[consume..]
        .find("#pragma omp barrier")
        .map(|p| p + consume)
        .expect("trailing barrier");
    let update = first
        .find("update_scaledend_1();")
        .expect("re-entry update");
    assert!(init < barrier1 && barrier1 < consume && consume < barrier2 && barrier2 < update);
    println!(
        "ACCEPT 7 PASS round-trip on {} kernels and the golden worklist transform",
        corpus::CORPUS.len()
    );
}

/// Criterion 8: every simulation behind criteria 1, 4, 5 and 6 produces a
/// byte-identical trace when run twice.
#[test]
fn criterion_8_determinism() {
    let figure2 = MachineConfig::figure2();
    let default = MachineConfig::default();
    let mut checked = 0usize;

    let mut check = |analysis: &Analysis, machine: &MachineConfig, opts: &SimOptions| {
        let a = sim::simulate(analysis, machine, opts).expect("simulate");
        let b = sim::simulate(analysis, machine, opts).expect("simulate");
        assert_eq!(a.trace_csv(), b.trace_csv());
        checked += 1;
    };

    let fig2 = analyze_corpus("fig2_like", &figure2);
    for policy in [Policy::Hmp, Policy::Ces] {
        check(
            &fig2,
            &figure2,
            &SimOptions {
                policy,
                ..SimOptions::default()
            },
        );
    }
    let sec = analyze_corpus("sec_like", &default);
    check(
        &sec,
        &default,
        &SimOptions {
            policy: Policy::Ces,
            ..SimOptions::default()
        },
    );
    check(
        &sec,
        &default,
        &SimOptions {
            policy: Policy::Hmp,
            seed: 0,
            hmp_sections_assignment: Some(vec![3, 3, 1, 0, 2, 7, 7, 4]),
        },
    );
    let mig = analyze_corpus("mig_like", &default);
    check(
        &mig,
        &default,
        &SimOptions {
            policy: Policy::Ces,
            ..SimOptions::default()
        },
    );
    println!("ACCEPT 8 PASS determinism: {checked} simulations byte-identical across runs");
}

/// Criterion 9: the tiny-body kernel is classified fixed-size, simulates
/// with zero steal attempts and still covers every iteration.
#[test]
fn criterion_9_fixed_size_behavior() {
    let machine = MachineConfig::default();
    let analysis = analyze_corpus("is_like", &machine);
    let seg = &analysis.regions[0].segments[0];
    match &seg.plan {
        SegmentPlan::For(p) => assert!(p.fixed_size, "is_like must classify fixed-size"),
        other => panic!("expected a loop plan, got {other:?}"),
    }
    let report = run_policy(&analysis, &machine, Policy::Ces);
    assert_eq!(report.steal_stats.steals_attempted, 0);
    assert_eq!(
        report.iteration_multiset(),
        (0..65536).map(|i| (1, i)).collect::<Vec<_>>()
    );
    println!("ACCEPT 9 PASS fixed-size: no steal attempts, 65536/65536 iterations covered");
}

//! CES scheduling decisions: unequal iteration division for `omp for`,
//! fixed-size classification, steal chunk sizing, two-stage sections
//! scheduling and migration-point placement.

pub mod migration;
pub mod sections;

use serde::{Deserialize, Serialize};

pub use migration::{place_migration_points, MigrationPair, MigrationPlan};
pub use sections::{schedule_sections, SectionAssignment};

use crate::workload::{estimate, CalibrationTable, CoreType, OpCounts};

#[derive(Debug, thiserror::Error)]
pub enum SchedulerError {
    #[error("executed counts sum to {got}, expected {expected}")]
    SumMismatch { got: i64, expected: i64 },
    #[error("sections construct has no sections")]
    EmptySections,
    #[error("negative iteration count")]
    NegativeIterations,
}

/// Cumulative scaled end points of the per-thread iteration division.
///
/// Thread `i`'s range is `[round(scaledend[i-1] * N), round(scaledend[i] * N))`,
/// so counts always sum to `N` and are non-negative because the fractions
/// are non-decreasing with last = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDivision {
    pub scaledend: Vec<f64>,
    /// N_ITRS expression when the trip count is only known at run time; the
    /// fractions above still apply and are scaled at loop entry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic: Option<String>,
}

impl IterationDivision {
    pub fn from_counts(counts: &[i64]) -> Self {
        let n: i64 = counts.iter().sum();
        let t = counts.len();
        let scaledend = if n == 0 {
            (1..=t).map(|i| i as f64 / t as f64).collect()
        } else {
            let mut acc = 0i64;
            counts
                .iter()
                .map(|c| {
                    acc += c;
                    acc as f64 / n as f64
                })
                .collect()
        };
        IterationDivision {
            scaledend,
            symbolic: None,
        }
    }

    pub fn even(threads: usize) -> Self {
        IterationDivision {
            scaledend: (1..=threads).map(|i| i as f64 / threads as f64).collect(),
            symbolic: None,
        }
    }

    pub fn n_threads(&self) -> usize {
        self.scaledend.len()
    }

    pub fn counts(&self, n_itrs: i64) -> Vec<i64> {
        self.ranges(n_itrs).iter().map(|(lo, hi)| hi - lo).collect()
    }

    pub fn ranges(&self, n_itrs: i64) -> Vec<(i64, i64)> {
        let mut out = Vec::with_capacity(self.scaledend.len());
        let mut prev = 0i64;
        for f in &self.scaledend {
            let end = (f * n_itrs as f64).round() as i64;
            out.push((prev, end));
            prev = end;
        }
        out
    }
}

/// The complete per-loop decision record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopPlan {
    pub division: IterationDivision,
    pub chunk: i64,
    pub fixed_size: bool,
    /// The loop may execute again (it sits under some enclosing loop), so
    /// the emitted code re-balances scaledend from observed execution.
    pub reentrant: bool,
    pub n_itrs: NItrs,
    pub per_iter: OpCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum NItrs {
    Const(i64),
    Symbolic(String),
}

/// Split `n_itrs` iterations over one thread per core: continuous split
/// proportional to core speed for this iteration mix, largest-remainder
/// rounding, then greedy single-iteration moves while the imbalance strictly
/// decreases.
pub fn divide_iterations(
    n_itrs: i64,
    cores: &[CoreType],
    iter_counts: &OpCounts,
    calib: &CalibrationTable,
) -> IterationDivision {
    IterationDivision::from_counts(&divide_counts(n_itrs, cores, iter_counts, calib))
}

pub fn divide_counts(
    n_itrs: i64,
    cores: &[CoreType],
    iter_counts: &OpCounts,
    calib: &CalibrationTable,
) -> Vec<i64> {
    let t = cores.len();
    if t == 0 {
        return Vec::new();
    }
    if n_itrs <= 0 {
        return vec![0; t];
    }
    let times: Vec<f64> = cores
        .iter()
        .map(|&ct| {
            estimate(iter_counts, ct, calib)
                .total()
                .max(f64::MIN_POSITIVE)
        })
        .collect();

    // continuous proportional split
    let speeds: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
    let total_speed: f64 = speeds.iter().sum();
    let shares: Vec<f64> = speeds
        .iter()
        .map(|s| n_itrs as f64 * s / total_speed)
        .collect();

    // largest-remainder rounding
    let mut counts: Vec<i64> = shares.iter().map(|s| s.floor() as i64).collect();
    let assigned: i64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take((n_itrs - assigned) as usize) {
        counts[i] += 1;
    }

    // steepest-descent single-iteration moves
    let im = |c: &[i64]| -> f64 {
        let wl: Vec<f64> = c.iter().zip(&times).map(|(&n, &t)| n as f64 * t).collect();
        crate::workload::imbalance(&wl).0
    };
    let mut cur = im(&counts);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..t {
            if counts[a] == 0 {
                continue;
            }
            for b in 0..t {
                if a == b {
                    continue;
                }
                counts[a] -= 1;
                counts[b] += 1;
                let v = im(&counts);
                counts[a] += 1;
                counts[b] -= 1;
                if v < cur && best.is_none_or(|(bv, _, _)| v < bv) {
                    best = Some((v, a, b));
                }
            }
        }
        match best {
            Some((v, a, b)) => {
                counts[a] -= 1;
                counts[b] += 1;
                cur = v;
            }
            None => break,
        }
    }
    counts
}

/// A loop is fixed-size (stealing disabled, static division only) when one
/// iteration is too cheap to justify a steal, or literally tiny.
pub fn classify_fixed_size(iter_counts: &OpCounts, calib: &CalibrationTable) -> bool {
    let iter_time = estimate(iter_counts, CoreType::Big, calib).total();
    iter_time < calib.fixed_size_factor * calib.steal_cost_s
        || (!iter_counts.unknown && iter_counts.alu + iter_counts.mem <= 3)
}

/// Steal chunk: enough iterations to cover the steal cost, but never more
/// than `n_itrs / (2 * n_threads)` so stealing can still balance.
pub fn compute_chunk(
    iter_counts: &OpCounts,
    calib: &CalibrationTable,
    n_itrs: Option<i64>,
    n_threads: usize,
) -> i64 {
    let iter_time = estimate(iter_counts, CoreType::Big, calib).total();
    let computed = if iter_time > 0.0 {
        (calib.chunk_factor * calib.steal_cost_s / iter_time).ceil() as i64
    } else {
        i64::MAX / 2
    };
    let mut chunk = computed.max(1);
    if let Some(n) = n_itrs {
        let cap = (n / (2 * n_threads as i64)).max(1);
        chunk = chunk.min(cap);
    }
    chunk
}

/// Re-entry re-balancing: the observed per-thread execution becomes the next
/// division.
pub fn update_scaledend(
    executed: &[i64],
    n_itrs: i64,
) -> Result<IterationDivision, SchedulerError> {
    if executed.iter().any(|&c| c < 0) {
        return Err(SchedulerError::NegativeIterations);
    }
    let got: i64 = executed.iter().sum();
    if got != n_itrs {
        return Err(SchedulerError::SumMismatch {
            got,
            expected: n_itrs,
        });
    }
    Ok(IterationDivision::from_counts(executed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::calib::CoreCalib;

    fn figure2_calib() -> CalibrationTable {
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

    const BBLL: [CoreType; 4] = [
        CoreType::Big,
        CoreType::Big,
        CoreType::Little,
        CoreType::Little,
    ];

    #[test]
    fn speed_proportional_division_on_figure2_machine() {
        let counts = divide_counts(100, &BBLL, &OpCounts::new(1, 0, 0), &figure2_calib());
        assert_eq!(counts, vec![36, 36, 14, 14]);
        // resulting imbalance: big 36 * 0.4 = 14.4 vs little 14 * 1.0 = 14.0
        let div = IterationDivision::from_counts(&counts);
        assert_eq!(div.counts(100), counts);
    }

    #[test]
    fn identical_cores_split_evenly() {
        let counts = divide_counts(
            100,
            &[CoreType::Big; 4],
            &OpCounts::new(5, 2, 1),
            &CalibrationTable::default(),
        );
        assert_eq!(counts, vec![25, 25, 25, 25]);
    }

    #[test]
    fn zero_iterations_divide_to_zero() {
        let counts = divide_counts(
            0,
            &BBLL,
            &OpCounts::new(1, 0, 0),
            &CalibrationTable::default(),
        );
        assert_eq!(counts, vec![0, 0, 0, 0]);
    }

    #[test]
    fn division_counts_always_sum_to_n() {
        let calib = CalibrationTable::default();
        for n in [1, 7, 23, 99, 1000] {
            let div = divide_iterations(n, &BBLL, &OpCounts::new(3, 1, 1), &calib);
            let counts = div.counts(n);
            assert_eq!(counts.iter().sum::<i64>(), n);
            assert!(counts.iter().all(|&c| c >= 0));
        }
    }

    #[test]
    fn permuting_identical_cores_permutes_the_division() {
        let calib = CalibrationTable::default();
        let counts = OpCounts::new(10, 3, 2);
        let a = divide_counts(97, &BBLL, &counts, &calib);
        let permuted = [
            CoreType::Little,
            CoreType::Big,
            CoreType::Big,
            CoreType::Little,
        ];
        let b = divide_counts(97, &permuted, &counts, &calib);
        // relabeling symmetry: per-type multisets of counts agree
        let mut a_big: Vec<i64> = vec![a[0], a[1]];
        let mut b_big: Vec<i64> = vec![b[1], b[2]];
        a_big.sort();
        b_big.sort();
        assert_eq!(a_big, b_big);
        let mut a_little = vec![a[2], a[3]];
        let mut b_little = vec![b[0], b[3]];
        a_little.sort();
        b_little.sort();
        assert_eq!(a_little, b_little);
    }

    #[test]
    fn tiny_body_is_fixed_size() {
        // s = s + a[i]: one alu, one mem
        let calib = CalibrationTable::default();
        assert!(classify_fixed_size(&OpCounts::new(1, 1, 1), &calib));
    }

    #[test]
    fn heavy_body_is_not_fixed_size() {
        let calib = CalibrationTable::default();
        assert!(!classify_fixed_size(&OpCounts::new(500, 0, 1), &calib));
    }

    #[test]
    fn unknown_body_keeps_stealing() {
        let calib = CalibrationTable::default();
        assert!(!classify_fixed_size(&OpCounts::unknown(), &calib));
    }

    #[test]
    fn chunk_covers_steal_cost() {
        // per-iteration big time = steal_cost / 10  => chunk 10
        let base = CalibrationTable::default();
        let calib = CalibrationTable {
            steal_cost_s: 10.0 * estimate(&OpCounts::new(100, 0, 0), CoreType::Big, &base).total(),
            ..base
        };
        let chunk = compute_chunk(&OpCounts::new(100, 0, 0), &calib, None, 4);
        assert_eq!(chunk, 10);
    }

    #[test]
    fn expensive_iterations_get_chunk_one() {
        let calib = CalibrationTable {
            steal_cost_s: 1e-9,
            ..CalibrationTable::default()
        };
        let chunk = compute_chunk(&OpCounts::new(10_000, 0, 0), &calib, None, 4);
        assert_eq!(chunk, 1);
    }

    #[test]
    fn chunk_is_capped_to_preserve_balance() {
        let calib = CalibrationTable {
            steal_cost_s: 1.0, // enormous, pushes computed chunk way up
            ..CalibrationTable::default()
        };
        let chunk = compute_chunk(&OpCounts::new(1, 0, 0), &calib, Some(80), 8);
        assert!(chunk <= 5, "cap is n/(2T) = 5, got {chunk}");
    }

    #[test]
    fn update_scaledend_is_the_normalized_prefix_sum() {
        let div = update_scaledend(&[36, 36, 14, 14], 100).unwrap();
        let expect = [0.36, 0.72, 0.86, 1.0];
        for (got, want) in div.scaledend.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(div.counts(100), vec![36, 36, 14, 14]);

        let even = update_scaledend(&[25, 25, 25, 25], 100).unwrap();
        assert_eq!(even.scaledend, vec![0.25, 0.5, 0.75, 1.0]);

        let degenerate = update_scaledend(&[100, 0, 0, 0], 100).unwrap();
        assert_eq!(degenerate.scaledend, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn update_scaledend_rejects_sum_mismatch() {
        assert!(matches!(
            update_scaledend(&[10, 10], 100),
            Err(SchedulerError::SumMismatch {
                got: 20,
                expected: 100
            })
        ));
    }

    #[test]
    fn ranges_match_the_worked_example() {
        let div = IterationDivision {
            scaledend: vec![0.36, 0.72, 0.86, 1.0],
            symbolic: None,
        };
        assert_eq!(
            div.ranges(100),
            vec![(0, 36), (36, 72), (72, 86), (86, 100)]
        );
    }
}

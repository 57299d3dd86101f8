//! Two-stage sections scheduling: affinity allocation, then normalization.

use serde::{Deserialize, Serialize};

use super::SchedulerError;
use crate::workload::{estimate, CalibrationTable, CoreType, OpCounts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionAssignment {
    /// section id → thread id (threads are pinned one per core).
    pub assignment: Vec<usize>,
    /// Per-section affinity score wl(LITTLE) / wl(big); above the machine's
    /// neutral ratio means big-affine.
    pub affinity: Vec<f64>,
    pub neutral_ratio: f64,
    pub n_threads: usize,
    pub max_per_thread: usize,
    /// wl_im after affinity allocation, then after each accepted
    /// normalization move; strictly decreasing past the first entry.
    pub wl_im_trace: Vec<f64>,
}

impl SectionAssignment {
    pub fn sections_of(&self, thread: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&s| self.assignment[s] == thread)
            .collect()
    }

    /// N_ITRS of the rewritten static loop: max sections per thread times
    /// the thread count.
    pub fn n_itrs(&self) -> usize {
        self.max_per_thread * self.n_threads
    }
}

/// Geometric mean of the machine's ALU and MEM LITTLE/big time ratios; a
/// section whose own ratio exceeds it runs disproportionately worse on
/// LITTLE, i.e. it is big-affine.
pub fn neutral_ratio(calib: &CalibrationTable) -> f64 {
    let alu_ratio = (calib.little.cycles_per_alu / calib.little.frequency_hz)
        / (calib.big.cycles_per_alu / calib.big.frequency_hz);
    let mem_ratio = (calib.little.cycles_per_mem / calib.little.frequency_hz)
        / (calib.big.cycles_per_mem / calib.big.frequency_hz);
    (alu_ratio * mem_ratio).sqrt()
}

pub fn schedule_sections(
    sections: &[OpCounts],
    cores: &[CoreType],
    calib: &CalibrationTable,
) -> Result<SectionAssignment, SchedulerError> {
    if sections.is_empty() {
        return Err(SchedulerError::EmptySections);
    }
    let n_threads = cores.len();
    let neutral = neutral_ratio(calib);

    let wl_big: Vec<f64> = sections
        .iter()
        .map(|c| estimate(c, CoreType::Big, calib).total())
        .collect();
    let wl_little: Vec<f64> = sections
        .iter()
        .map(|c| estimate(c, CoreType::Little, calib).total())
        .collect();
    let affinity: Vec<f64> = wl_big
        .iter()
        .zip(&wl_little)
        .map(|(&b, &l)| if b > 0.0 { l / b } else { 1.0 })
        .collect();

    // stage 1: affinity allocation, heaviest section first, least-loaded
    // core of the preferred set
    let mut load = vec![0.0f64; n_threads];
    let mut assignment = vec![usize::MAX; sections.len()];
    let mut order: Vec<usize> = (0..sections.len()).collect();
    order.sort_by(|&a, &b| {
        let wa = preferred_wl(a, &affinity, neutral, &wl_big, &wl_little);
        let wb = preferred_wl(b, &affinity, neutral, &wl_big, &wl_little);
        wb.partial_cmp(&wa).unwrap().then(a.cmp(&b))
    });
    for &s in &order {
        let wants_big = affinity[s] > neutral;
        let preferred: Vec<usize> = (0..n_threads)
            .filter(|&c| (cores[c] == CoreType::Big) == wants_big)
            .collect();
        let candidates = if preferred.is_empty() {
            (0..n_threads).collect::<Vec<_>>()
        } else {
            preferred
        };
        let target = candidates
            .iter()
            .copied()
            .min_by(|&a, &b| load[a].partial_cmp(&load[b]).unwrap().then(a.cmp(&b)))
            .expect("machine has at least one core");
        assignment[s] = target;
        load[target] += section_wl(s, cores[target], &wl_big, &wl_little);
    }

    // stage 2: normalization. Move the least-affine section off the
    // max-loaded core onto the min-loaded core while that strictly lowers
    // the imbalance.
    let mut trace = vec![imbalance_of(&load)];
    loop {
        let cur = *trace.last().unwrap();
        let max_core = argmax(&load);
        let min_core = argmin(&load);
        let on_max: Vec<usize> = (0..sections.len())
            .filter(|&s| assignment[s] == max_core)
            .collect();
        if on_max.is_empty() || max_core == min_core {
            break;
        }
        // least affinity toward the max core's own type
        let target_section = on_max
            .into_iter()
            .min_by(|&a, &b| {
                let ta = toward(affinity[a], cores[max_core]);
                let tb = toward(affinity[b], cores[max_core]);
                ta.partial_cmp(&tb).unwrap().then(a.cmp(&b))
            })
            .unwrap();
        let mut new_load = load.clone();
        new_load[max_core] -= section_wl(target_section, cores[max_core], &wl_big, &wl_little);
        new_load[min_core] += section_wl(target_section, cores[min_core], &wl_big, &wl_little);
        let new_im = imbalance_of(&new_load);
        if new_im < cur {
            assignment[target_section] = min_core;
            load = new_load;
            trace.push(new_im);
        } else {
            break;
        }
    }

    let mut per_thread = vec![0usize; n_threads];
    for &t in &assignment {
        per_thread[t] += 1;
    }
    Ok(SectionAssignment {
        assignment,
        affinity,
        neutral_ratio: neutral,
        n_threads,
        max_per_thread: per_thread.iter().copied().max().unwrap_or(0),
        wl_im_trace: trace,
    })
}

fn preferred_wl(
    s: usize,
    affinity: &[f64],
    neutral: f64,
    wl_big: &[f64],
    wl_little: &[f64],
) -> f64 {
    if affinity[s] > neutral {
        wl_big[s]
    } else {
        wl_little[s]
    }
}

fn section_wl(s: usize, ct: CoreType, wl_big: &[f64], wl_little: &[f64]) -> f64 {
    match ct {
        CoreType::Big => wl_big[s],
        CoreType::Little => wl_little[s],
    }
}

/// Affinity of a section toward a core type; bigger means better suited.
fn toward(affinity: f64, ct: CoreType) -> f64 {
    match ct {
        CoreType::Big => affinity,
        CoreType::Little => {
            if affinity > 0.0 {
                1.0 / affinity
            } else {
                f64::MAX
            }
        }
    }
}

fn imbalance_of(load: &[f64]) -> f64 {
    crate::workload::imbalance(load).0
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] < xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_BIG_FOUR_LITTLE: [CoreType; 8] = [
        CoreType::Big,
        CoreType::Big,
        CoreType::Big,
        CoreType::Big,
        CoreType::Little,
        CoreType::Little,
        CoreType::Little,
        CoreType::Little,
    ];

    /// ALU-heavy, like trial division.
    fn prime_like() -> OpCounts {
        OpCounts::new(21600, 0, 14400)
    }

    /// Memory-heavy, like table interpolation.
    fn sine_like() -> OpCounts {
        OpCounts::new(2000, 6000, 2000)
    }

    #[test]
    fn prime_like_sections_land_on_big_cores() {
        let sections = vec![
            prime_like(),
            sine_like(),
            prime_like(),
            sine_like(),
            prime_like(),
            sine_like(),
            prime_like(),
            sine_like(),
        ];
        let a = schedule_sections(
            &sections,
            &FOUR_BIG_FOUR_LITTLE,
            &CalibrationTable::default(),
        )
        .unwrap();
        for (s, &thread) in a.assignment.iter().enumerate() {
            if s % 2 == 0 {
                assert_eq!(
                    FOUR_BIG_FOUR_LITTLE[thread],
                    CoreType::Big,
                    "prime-like section {s} must land on a big core"
                );
            } else {
                assert_eq!(FOUR_BIG_FOUR_LITTLE[thread], CoreType::Little);
            }
        }
        assert_eq!(a.max_per_thread, 1);
        assert_eq!(a.n_itrs(), 8);
    }

    #[test]
    fn two_identical_sections_on_two_identical_cores_balance() {
        let sections = vec![OpCounts::new(100, 10, 5), OpCounts::new(100, 10, 5)];
        let a = schedule_sections(
            &sections,
            &[CoreType::Big, CoreType::Big],
            &CalibrationTable::default(),
        )
        .unwrap();
        assert_ne!(a.assignment[0], a.assignment[1]);
        assert_eq!(*a.wl_im_trace.last().unwrap(), 0.0);
    }

    #[test]
    fn single_section_goes_to_min_loaded_core_of_preferred_set() {
        let sections = vec![prime_like()];
        let a = schedule_sections(
            &sections,
            &FOUR_BIG_FOUR_LITTLE,
            &CalibrationTable::default(),
        )
        .unwrap();
        assert_eq!(a.assignment, vec![0], "first big core, all loads equal");
        assert_eq!(a.n_itrs(), 8, "one section, eight threads");
    }

    #[test]
    fn empty_sections_are_rejected() {
        assert!(matches!(
            schedule_sections(&[], &FOUR_BIG_FOUR_LITTLE, &CalibrationTable::default()),
            Err(SchedulerError::EmptySections)
        ));
    }

    #[test]
    fn normalization_trace_is_strictly_decreasing() {
        // unbalanced mix that forces normalization moves
        let sections: Vec<OpCounts> = (0..6)
            .map(|i| OpCounts::new(1000 * (i + 1), 50 * (6 - i), 10))
            .collect();
        let a = schedule_sections(
            &sections,
            &[
                CoreType::Big,
                CoreType::Big,
                CoreType::Little,
                CoreType::Little,
            ],
            &CalibrationTable::default(),
        )
        .unwrap();
        for pair in a.wl_im_trace.windows(2) {
            assert!(
                pair[1] < pair[0],
                "accepted move must lower wl_im: {:?}",
                a.wl_im_trace
            );
        }
    }

    #[test]
    fn neutral_ratio_sits_between_the_two_class_ratios() {
        let calib = CalibrationTable::default();
        let n = neutral_ratio(&calib);
        assert!(n > 1.0 && n < 2.5, "{n}");
    }
}

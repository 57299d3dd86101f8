//! Per-core-type calibration: cycle costs, frequencies, power draws and the
//! machine-wide scheduling cost knobs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreType {
    Big,
    Little,
}

impl std::fmt::Display for CoreType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoreType::Big => write!(f, "big"),
            CoreType::Little => write!(f, "little"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreCalib {
    pub cycles_per_alu: f64,
    pub cycles_per_mem: f64,
    pub cycles_per_branch_miss: f64,
    /// Fraction of branches that miss, in [0, 1].
    pub branch_miss_rate: f64,
    pub frequency_hz: f64,
    pub active_power_w: f64,
    pub idle_power_w: f64,
}

/// The cost model constants.
///
/// The shipped defaults are fitted, not measured: the pure-ALU time ratio
/// LITTLE/big comes out at 2.5 for 1.3/1.9 GHz, and the memory-path ratio is
/// deliberately much flatter than the ALU ratio. Every field can be
/// overridden through `machine.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTable {
    pub big: CoreCalib,
    pub little: CoreCalib,
    /// Time charged to a stealer per successful steal, seconds.
    pub steal_cost_s: f64,
    /// Fixed part of a thread migration / exchange, seconds.
    pub migration_base_cost_s: f64,
    /// Exchange cost per live variable, seconds.
    pub live_var_cost_s: f64,
    /// Ceiling for unknown-cost constructs, in ALU-op equivalents.
    pub unknown_cost_alu: f64,
    /// A loop is fixed-size when its per-iteration big-core time is below
    /// `fixed_size_factor * steal_cost_s`.
    pub fixed_size_factor: f64,
    /// Steal chunk scaling: chunk covers `chunk_factor * steal_cost_s` worth
    /// of iterations.
    pub chunk_factor: f64,
}

impl CalibrationTable {
    pub fn for_type(&self, ct: CoreType) -> &CoreCalib {
        match ct {
            CoreType::Big => &self.big,
            CoreType::Little => &self.little,
        }
    }

    /// Cycle costs, frequencies and active power must be strictly positive;
    /// overhead costs may be zero (a zero-overhead machine is a supported
    /// configuration), and miss rates must be fractions.
    pub fn validate(&self) -> Result<(), String> {
        for (ct, c) in [("big", &self.big), ("little", &self.little)] {
            for (what, v) in [
                ("cycles_per_alu", c.cycles_per_alu),
                ("cycles_per_mem", c.cycles_per_mem),
                ("cycles_per_branch_miss", c.cycles_per_branch_miss),
                ("frequency_hz", c.frequency_hz),
                ("active_power_w", c.active_power_w),
            ] {
                if v <= 0.0 || !v.is_finite() {
                    return Err(format!("{ct}.{what} must be positive, got {v}"));
                }
            }
            if !(0.0..=1.0).contains(&c.branch_miss_rate) {
                return Err(format!(
                    "{ct}.branch_miss_rate must be in [0, 1], got {}",
                    c.branch_miss_rate
                ));
            }
            if c.idle_power_w < 0.0 || !c.idle_power_w.is_finite() {
                return Err(format!("{ct}.idle_power_w must be non-negative"));
            }
        }
        for (what, v) in [
            ("steal_cost_s", self.steal_cost_s),
            ("migration_base_cost_s", self.migration_base_cost_s),
            ("live_var_cost_s", self.live_var_cost_s),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(format!("{what} must be non-negative, got {v}"));
            }
        }
        for (what, v) in [
            ("unknown_cost_alu", self.unknown_cost_alu),
            ("fixed_size_factor", self.fixed_size_factor),
            ("chunk_factor", self.chunk_factor),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(format!("{what} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

impl Default for CalibrationTable {
    fn default() -> Self {
        CalibrationTable {
            big: CoreCalib {
                cycles_per_alu: 1.0,
                cycles_per_mem: 4.0,
                cycles_per_branch_miss: 15.0,
                branch_miss_rate: 0.05,
                frequency_hz: 1.9e9,
                active_power_w: 1.5,
                idle_power_w: 0.05,
            },
            little: CoreCalib {
                cycles_per_alu: 1.71,
                cycles_per_mem: 3.0,
                cycles_per_branch_miss: 8.0,
                branch_miss_rate: 0.05,
                frequency_hz: 1.3e9,
                active_power_w: 0.4,
                idle_power_w: 0.02,
            },
            steal_cost_s: 1e-6,
            migration_base_cost_s: 2e-5,
            live_var_cost_s: 1e-6,
            unknown_cost_alu: 1e6,
            fixed_size_factor: 0.1,
            chunk_factor: 1.0,
        }
    }
}

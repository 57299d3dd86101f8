//! Machine description files (`machine.json`): core inventory, calibration
//! table and HMP baseline parameters.

use serde::{Deserialize, Serialize};

use crate::workload::calib::{CalibrationTable, CoreCalib, CoreType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreSpec {
    #[serde(rename = "type")]
    pub core_type: CoreType,
    /// Per-core frequency override; defaults to the calibration table's
    /// frequency for the core's type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
}

/// Parameters of the utilization-driven HMP baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmpParams {
    /// Sliding utilization window, seconds. Zero means instantaneous
    /// utilization (running = 1, blocked = 0).
    pub window_s: f64,
    pub up_threshold: f64,
    pub down_threshold: f64,
}

impl Default for HmpParams {
    fn default() -> Self {
        HmpParams {
            window_s: 0.032,
            up_threshold: 0.8,
            down_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    /// Config format version; must be 1.
    pub schema: u32,
    pub cores: Vec<CoreSpec>,
    pub calibration: CalibrationTable,
    #[serde(default)]
    pub hmp: HmpParams,
}

#[derive(Debug, thiserror::Error)]
pub enum MachineError {
    #[error("unsupported machine schema {0}, expected 1")]
    BadSchema(u32),
    #[error("machine has no cores")]
    NoCores,
    #[error("invalid calibration: {0}")]
    BadCalibration(String),
    #[error("core {index} frequency must be positive")]
    BadFrequency { index: usize },
    #[error("invalid hmp parameters: {0}")]
    BadHmp(String),
    #[error("machine config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MachineConfig {
    pub fn from_json(text: &str) -> Result<Self, MachineError> {
        let cfg: MachineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, MachineError> {
        let text = std::fs::read_to_string(path)?;
        MachineConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        if self.schema != 1 {
            return Err(MachineError::BadSchema(self.schema));
        }
        if self.cores.is_empty() {
            return Err(MachineError::NoCores);
        }
        self.calibration
            .validate()
            .map_err(MachineError::BadCalibration)?;
        for (index, c) in self.cores.iter().enumerate() {
            if let Some(f) = c.frequency_hz {
                if f <= 0.0 || !f.is_finite() {
                    return Err(MachineError::BadFrequency { index });
                }
            }
        }
        if self.hmp.window_s < 0.0
            || !(0.0..=1.0).contains(&self.hmp.up_threshold)
            || !(0.0..=1.0).contains(&self.hmp.down_threshold)
        {
            return Err(MachineError::BadHmp(format!(
                "window {} up {} down {}",
                self.hmp.window_s, self.hmp.up_threshold, self.hmp.down_threshold
            )));
        }
        Ok(())
    }

    pub fn core_types(&self) -> Vec<CoreType> {
        self.cores.iter().map(|c| c.core_type).collect()
    }

    pub fn frequency_of(&self, core: usize) -> f64 {
        let c = &self.cores[core];
        c.frequency_hz
            .unwrap_or(self.calibration.for_type(c.core_type).frequency_hz)
    }

    /// Calibration with one core's actual frequency substituted in, so
    /// per-core overrides affect its timing and nothing else.
    pub fn calib_for_core(&self, core: usize) -> CoreCalib {
        let ct = self.cores[core].core_type;
        let mut c = self.calibration.for_type(ct).clone();
        c.frequency_hz = self.frequency_of(core);
        c
    }

    pub fn count_of(&self, ct: CoreType) -> usize {
        self.cores.iter().filter(|c| c.core_type == ct).count()
    }

    fn n_cores(big: usize, little: usize) -> Vec<CoreSpec> {
        let mut cores = Vec::new();
        for _ in 0..big {
            cores.push(CoreSpec {
                core_type: CoreType::Big,
                frequency_hz: None,
            });
        }
        for _ in 0..little {
            cores.push(CoreSpec {
                core_type: CoreType::Little,
                frequency_hz: None,
            });
        }
        cores
    }

    /// The default 4 big + 4 LITTLE machine with the fitted calibration.
    pub fn default_4b4l() -> Self {
        MachineConfig {
            schema: 1,
            cores: Self::n_cores(4, 4),
            calibration: CalibrationTable::default(),
            hmp: HmpParams::default(),
        }
    }

    pub fn with_counts(big: usize, little: usize) -> Self {
        MachineConfig {
            schema: 1,
            cores: Self::n_cores(big, little),
            calibration: CalibrationTable::default(),
            hmp: HmpParams::default(),
        }
    }

    /// Abstract 2 big + 2 LITTLE machine with per-iteration speeds 2.5 : 1,
    /// zero overheads and an instantaneous HMP window — the worked scenario
    /// where static HMP finishes at 16.0 and the CES division at 14.4 time
    /// units.
    pub fn figure2() -> Self {
        MachineConfig {
            schema: 1,
            cores: Self::n_cores(2, 2),
            calibration: CalibrationTable {
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
            },
            hmp: HmpParams {
                window_s: 0.0,
                up_threshold: 0.8,
                down_threshold: 0.3,
            },
        }
    }
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig::default_4b4l()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = MachineConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = MachineConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::to_value(MachineConfig::default()).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("surprise".into(), serde_json::json!(1));
        let text = serde_json::to_string(&v).unwrap();
        assert!(MachineConfig::from_json(&text).is_err());
    }

    #[test]
    fn schema_and_shape_are_validated() {
        let cfg = MachineConfig {
            schema: 2,
            ..MachineConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(MachineError::BadSchema(2))));

        let mut cfg = MachineConfig::default();
        cfg.cores.clear();
        assert!(matches!(cfg.validate(), Err(MachineError::NoCores)));

        let mut cfg = MachineConfig::default();
        cfg.calibration.big.frequency_hz = -1.0;
        assert!(matches!(
            cfg.validate(),
            Err(MachineError::BadCalibration(_))
        ));
    }

    #[test]
    fn default_frequencies_sit_in_the_documented_bands() {
        let cfg = MachineConfig::default();
        let b = cfg.calibration.big.frequency_hz;
        let l = cfg.calibration.little.frequency_hz;
        assert!((0.8e9..=1.9e9).contains(&b));
        assert!((0.6e9..=1.3e9).contains(&l));
    }

    #[test]
    fn shipped_configs_match_the_builtin_machines() {
        let default =
            MachineConfig::from_json(include_str!("../../../configs/default_machine.json"))
                .unwrap();
        assert_eq!(default, MachineConfig::default());

        let figure2 =
            MachineConfig::from_json(include_str!("../../../configs/figure2_machine.json"))
                .unwrap();
        assert_eq!(figure2, MachineConfig::figure2());

        for shipped in [
            include_str!("../../../configs/machine_2b4l.json"),
            include_str!("../../../configs/machine_2b2l.json"),
        ] {
            MachineConfig::from_json(shipped).unwrap();
        }
    }

    #[test]
    fn per_core_frequency_overrides_apply() {
        let mut cfg = MachineConfig::default();
        cfg.cores[0].frequency_hz = Some(1.0e9);
        assert_eq!(cfg.frequency_of(0), 1.0e9);
        assert_eq!(cfg.frequency_of(1), 1.9e9);
        assert_eq!(cfg.calib_for_core(0).frequency_hz, 1.0e9);
    }
}

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::preset::calibrate_from_table1;
use crate::adversary::{AttackModel, Normalization};
use crate::error::{Error, Result};
use crate::optics::{ApparatusConfig, Setting};
use crate::stats::{DriftModel, ScanSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ProtocolSession,
    FringeScan,
    Stability,
    SecurityReport,
    Table1Repro,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::ProtocolSession => "protocol-session",
            ExperimentKind::FringeScan => "fringe-scan",
            ExperimentKind::Stability => "stability",
            ExperimentKind::SecurityReport => "security-report",
            ExperimentKind::Table1Repro => "table1-repro",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}; use json or csv"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: OutputFormat,
    /// Destination file; standard output when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

/// Path-difference grid of a fringe scan; each point is acquired for the
/// experiment duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanParams {
    pub setting: Setting,
    pub start_um: f64,
    pub stop_um: f64,
    pub step_um: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            setting: Setting::new(false, false),
            start_um: -20.0,
            stop_um: 20.0,
            step_um: 0.02,
        }
    }
}

impl ScanParams {
    pub fn spec(&self, dwell_s: f64) -> ScanSpec {
        ScanSpec {
            setting: self.setting,
            start_um: self.start_um,
            stop_um: self.stop_um,
            step_um: self.step_um,
            dwell_s,
        }
    }
}

/// Long acquisition at fixed path difference; the experiment duration is
/// the total time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    pub setting: Setting,
    pub bin_s: f64,
    #[serde(default)]
    pub drift: DriftModel,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            setting: Setting::new(false, false),
            bin_s: 20.0,
            drift: DriftModel::None,
        }
    }
}

/// Repeated fixed-setting sessions per table column; each lasts the
/// experiment duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Params {
    pub sessions: u32,
}

impl Default for Table1Params {
    fn default() -> Self {
        Table1Params { sessions: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityParams {
    /// Overrides the dark-count estimate of gamma.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Overrides the detector efficiency of the time-shift correction.
    #[serde(default)]
    pub eta: Option<f64>,
}

fn preset() -> ApparatusConfig {
    calibrate_from_table1()
}

/// Everything that determines one run. Identical configurations produce
/// byte-identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "preset")]
    pub apparatus: ApparatusConfig,
    pub experiment: ExperimentKind,
    /// Session length, scan dwell per point, or total stability time.
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub attack: AttackModel,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub scan: ScanParams,
    #[serde(default)]
    pub stability: StabilityParams,
    #[serde(default)]
    pub table1: Table1Params,
    #[serde(default)]
    pub security: SecurityParams,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, duration_s: f64, seed: u64) -> Self {
        ExperimentConfig {
            apparatus: preset(),
            experiment,
            duration_s,
            seed,
            output: OutputSpec::default(),
            attack: AttackModel::None,
            normalization: Normalization::default(),
            scan: ScanParams::default(),
            stability: StabilityParams::default(),
            table1: Table1Params::default(),
            security: SecurityParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("experiment configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.apparatus.validate()?;
        self.attack.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        match self.experiment {
            ExperimentKind::FringeScan => {
                self.scan.spec(self.duration_s).points()?;
            }
            ExperimentKind::Stability => {
                if !(self.stability.bin_s > 0.0 && self.stability.bin_s <= self.duration_s) {
                    return Err(Error::InvalidConfig(format!(
                        "stability bin {} s must be positive and at most the duration",
                        self.stability.bin_s
                    )));
                }
            }
            ExperimentKind::Table1Repro => {
                if self.table1.sessions < 2 {
                    return Err(Error::InvalidConfig("table1 needs at least two sessions per setting".into()));
                }
            }
            ExperimentKind::SecurityReport => {
                if let Some(g) = self.security.gamma {
                    if !(0.0..=1.0).contains(&g) {
                        return Err(Error::InvalidConfig(format!("gamma must lie in [0, 1], got {g}")));
                    }
                }
                if let Some(eta) = self.security.eta {
                    if !(eta > 0.0 && eta <= 1.0) {
                        return Err(Error::InvalidConfig(format!("eta must lie in (0, 1], got {eta}")));
                    }
                }
            }
            ExperimentKind::ProtocolSession => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_uses_preset() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "protocol-session", "duration_s": 20, "seed": 1}"#).unwrap();
        assert_eq!(cfg.apparatus, calibrate_from_table1());
        assert_eq!(cfg.output.format, OutputFormat::Json);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": "protocol-session", "duration_s": 20, "seed": 1, "x": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "session", "duration_s": 20, "seed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "protocol-session", "duration_s": 0, "seed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "protocol-session", "seed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "protocol-session", "duration_s": 20}"#).is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "stability", "duration_s": 40, "seed": 1, "stability": {"bin_s": 5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.stability.bin_s, 5.0);
        assert_eq!(cfg.stability.setting, StabilityParams::default().setting);
    }

    #[test]
    fn roundtrip() {
        let cfg = ExperimentConfig::new(ExperimentKind::FringeScan, 20.0, 7);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}

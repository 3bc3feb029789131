//! Experiment configuration, the calibrated apparatus preset and the runner
//! that turns a configuration into JSON or CSV output.

mod config;
mod preset;
mod runner;

pub use config::{
    ExperimentConfig, ExperimentKind, OutputFormat, OutputSpec, ScanParams, SecurityParams, StabilityParams,
    Table1Params,
};
pub use preset::{calibrate_from_table1, ACQUISITION_S};
pub use runner::{
    counts_qber, execute, run, run_attacked, table1_report, table1_sessions, write_atomic, Artifact, ScanReport,
    SecurityRunReport, SessionReport, StabilityReport, Table1Column, Table1Report,
};

//! Experiment orchestration: configuration, assumption checks, seeded
//! runners and file artifacts.

pub mod chain;
pub mod config;
pub mod iq;
pub mod runner;
pub mod validate;

pub use chain::{random_bits, transmit, Transmission};
pub use config::{ChannelSettings, ExperimentConfig, RdSettings, Scenario, ScheduleSettings};
pub use iq::{export_iq, import_iq, IqMetadata};
pub use runner::{
    ber_trial, expected_targets, map_csv, peaks_csv, rd_trial, records_csv, run_ber_sweep, run_rd_experiment,
    write_ber_outputs, write_rd_outputs,
    RdOutcome, ResultRecord, RunOptions,
};
pub use validate::{validate_assumptions, CheckResult, ValidationReport};

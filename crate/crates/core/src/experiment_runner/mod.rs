//! Orchestration: single experiments, growth-rate sweeps, persistence and the
//! built-in identity checks.

mod experiment;
mod persist;
mod selftest;
mod sweep;

pub use experiment::{config_hash, run_experiment, ExperimentResult};
pub use persist::{read_json, write_csv, write_json, CSV_COLUMNS, SCHEMA_VERSION};
pub use selftest::{self_test, self_test_for, CheckOutcome, SelfTestReport};
pub use sweep::{dimension_for, run_sweep, GrowthRule, SweepResult, SweepRow, SweepSpec};

//! Experiment orchestration: configuration, per-mode pipelines and sweeps.

pub mod config;
pub mod run;
pub mod sweep;

pub use config::{load_config, ConfigError, Mode, Profile, ScenarioConfig};
pub use run::{design_precoders, run, run_fixed, run_mobile, run_tethered, Design, RunOutcome};
pub use sweep::{
    emit_csv, read_csv, run_sweep, write_aggregate_csv, write_csv, CellAggregate, SweepError,
    SweepParam, SweepResult, SweepRow, SweepSpec, AGGREGATE_COLUMNS, CSV_COLUMNS,
};

//! Experiment orchestration: configuration, the online loop, the
//! model-based baseline, diagnostics and output files.

pub mod config;
pub mod output;
pub mod run;

pub use config::{
    example_registry, CostConfig, EntryOverride, Experiment, ExperimentConfig, LearnerSettings,
    Mode, PlantSpec, DEFAULT_HORIZON, OUT_DIR_ENV,
};
pub use output::{compare, csv_string, write_csv, write_outputs, SummaryDocument};
pub use run::{
    check_pe, explore, oracle_report, run_model_based, run_online, Exploration, OracleReport,
    PeReport, Phase, RunLog, RunSummary, StepRecord, EXPLORATION_FLOOR, MAX_EXPLORATION_RETRIES,
    STOP_NORM,
};

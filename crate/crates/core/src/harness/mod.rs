//! Experiment orchestration: configuration, chains, sweeps, scaling
//! studies, exact validation, CSV output and data loading.

pub mod config;
pub mod data;
pub mod mnist;
pub mod run;

pub use config::{ExperimentConfig, Mode, ModelFamily, SamplerChoice};
pub use data::two_cluster_data;
pub use mnist::{load_idx_labels, load_mnist_idx, parse_idx_labels, parse_mnist_idx};
pub use run::{
    build_model, run_chain, run_chain_with, run_setting, scaling_study, setting_from_config, simulate, sweep,
    sweep_csv, tune_scale, validate, write_csv, write_csv_to, ChainRun, CsvRow, ScaleMode, ScalingPoint, ScalingResult,
    Setting, SettingResult, SweepRow, ValidationEntry, ValidationReport, CSV_HEADER,
};

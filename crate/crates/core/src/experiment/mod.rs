//! Experiment runner: the fixed/growing × small/large condition matrix,
//! seeded cells, on-disk metrics and summaries.
//!
//! Layout written by [`run_experiment`]:
//!
//! ```text
//! <output_dir>/experiment.toml
//! <output_dir>/<condition>/seed_<seed>/{config.toml, run.json, metrics.csv, growth_events.jsonl, *.json}
//! <output_dir>/{summary.json, summary.csv, plot_data.csv}
//! ```

mod config;
mod metrics;
mod runner;
mod summary;

pub use config::{
    CifarSection, Condition, ExperimentConfig, NetworkSection, Task, DATA_DIR_ENV, RL_WIDTH_CAP,
};
pub use metrics::{
    metrics_header, read_events, read_metrics, write_events, write_metrics, RunInfo, RunStatus,
    CONFIG_SNAPSHOT_FILE, EVENTS_FILE, METRICS_FILE, METRICS_SCHEMA_VERSION, RUN_INFO_FILE,
};
pub use runner::{
    binary_accuracy, load_images, run_and_record, run_cell, run_dir, run_experiment, task_name,
    CellResult, RunReport,
};
pub use summary::{
    emit_plot_data, find_run_dirs, summarize, write_summary_csv, write_summary_json,
    ConditionSummary, EpochStats, LoadedRun, RunError, RunSummary, Stat,
};

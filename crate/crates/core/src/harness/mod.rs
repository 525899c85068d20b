//! Experiment plumbing: configuration, serialization, comparison reports
//! and the run manifest.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod output;

pub use compare::{gaussian_oracle, run_comparison, Comparison, ComparisonReport, ComparisonRow, Distance, Verdict};
pub use config::{
    load_config, parse_config, ExperimentConfig, ExperimentKind, OutputFormat, OutputSpec, SCHEMA_VERSION,
};
pub use experiment::{run_experiment, tolerances, Manifest, RunOutcome};
pub use output::{emit_plot_data, fmt_f64, FileEntry, OutputSink, Snapshot};

//! Experiment configuration, reference solutions, runs and trace output.

pub mod config;
pub mod runner;
pub mod trace;

pub use config::{build_model, ExperimentConfig, LabelMapConfig, OutputConfig, PartitionConfig, PartitionScheme, ProblemConfig};
pub use runner::{reference, reference_minimizer, resolve_step, run_algorithm, run_experiment};
pub use trace::{
    emit_traces, read_csv, write_csv, write_json, AlgoTrace, CsvRow, ExperimentReport, Reference, RunStatus, Summary,
    TraceRecord, CSV_HEADER,
};

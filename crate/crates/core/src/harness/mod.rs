//! Experiment runner: configs, seeded repeats, sweeps and report files.

pub mod config;
pub mod experiment;
pub mod output;
pub mod sweep;

pub use config::{DataSource, ExperimentConfig, MethodKind, MethodSpec, PartitionConfig, PrivacyConfig, RoundsConfig};
pub use experiment::{
    prepare_clients, run_experiment, run_method, ClientMetrics, ExperimentReport, ExperimentRun, MeanStd,
    MethodResult, MethodRun, MethodSummary, RepeatResult, RoundRecord, ACCURACY_DROP_THRESHOLD,
};
pub use output::{emit_run, format_sig6, report_to_json, write_rounds_jsonl, write_summary_csv, SUMMARY_CSV_HEADER};
pub use sweep::{apply_axis, sweep, write_sweep_csv, SweepAxis, SweepPoint, SWEEP_CSV_HEADER};

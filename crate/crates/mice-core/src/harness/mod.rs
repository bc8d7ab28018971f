//! Benchmark harness: experiment configs, replicate orchestration, rate
//! oracles, and plot-ready output.

use thiserror::Error;

mod config;
mod experiment;
mod stats;

pub use config::{
    parse_experiment_config, ExperimentConfig, MethodSpec, ProblemSpec, ScheduleKind, StopSpec,
};
pub use experiment::{
    aggregate_records, build_problem, logistic_reference_optimum, render_gap_svg, run_experiment,
    run_replicate, run_replicates, write_aggregate_csv, AggregateRow, ExperimentSummary,
    ProblemInstance, AGGREGATE_HEADER,
};
pub use stats::{
    bootstrap_mean_band, fit_linear_slope, fit_loglog_slope, percentile, theory_rate,
    total_sampling_cost,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Telemetry(#[from] crate::telemetry::TelemetryError),
    #[error(transparent)]
    Optim(#[from] crate::optim::OptimError),
}

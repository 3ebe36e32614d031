//! Training loop, evaluation, cluster analysis and the table suites.

mod cluster;
mod config;
mod results;
mod suite;
mod train;

pub use cluster::{cluster_analysis, pair_name, ClusterReport, PAIRS};
pub use config::{Condition, ModelKind, TrainConfig, UpdatePolicy};
pub use results::{
    read_results_csv, run_file_stem, summarize, write_results_csv, write_suite, ConditionSummary, RunManifest, RunRow,
    Stat, CODE_HASH,
};
pub use suite::{
    run_condition, run_conditions, run_experiment_suite, run_suite_with_progress, RunRecord, Suite, SuiteResult,
};
pub use train::{evaluate, evaluate_network, generate, train_network, train_one, AnyModel, EvalResult, TrainLog};

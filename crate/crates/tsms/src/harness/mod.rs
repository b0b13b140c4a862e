//! Experiment orchestration: configuration, dataset ingestion, evaluation
//! (RMSE, ranks, wins/losses) and explanation-report emission.

mod config;
mod dataset;
mod experiment;
mod explain;
mod report;

pub use config::{parse_config, RmseScale, RunConfig, VariantChoice};
pub use dataset::load_dataset_csv;
pub use experiment::{
    prepare_dataset, rank_and_compare, run_experiment, run_experiment_prepared, run_rmse,
    run_variant, EvaluationReport, PreparedDataset,
};
pub use explain::{
    emit_explanation_report, explanation_report_to_text, parse_explanation_report,
    ExplanationStep, EXPLANATION_HEADER,
};
pub use report::{report_to_text, REPORT_HEADER};

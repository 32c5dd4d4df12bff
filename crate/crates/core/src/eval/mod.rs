//! Scoring, beneficiary selection, targeting error and replication
//! experiments.

mod experiment;
mod metrics;
mod scoring;

pub use experiment::{
    replication_experiment, stacked_dichotomized, ExperimentData, ExperimentPlan, ExperimentResult, Method,
    ReplicationError, SummaryRow,
};
pub use metrics::{error_rate, mean_sd, pooled_error_rate, rank_correlation, standardized_coefficients};
pub use scoring::{aggregate_model_ranking, compute_scores, score_households, select_beneficiaries, select_by_community};

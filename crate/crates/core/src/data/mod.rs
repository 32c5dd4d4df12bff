//! Domain types, file ingestion, covariate scaling and rank utilities.

pub mod io;
mod rank;
mod scaling;
mod types;

pub use rank::{argsort, rank_of, rank_with_ties};
pub use scaling::{standardize_covariates, standardize_covariates_with, ColumnKind, ColumnScale, ScalingInfo};
pub use types::{CovariateSchema, Dataset, Household, RankingScheme};

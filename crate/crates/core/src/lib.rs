//! Calibrating poverty-targeting weights to community needs rankings.
//!
//! Rankings are modelled as orderings of normally perturbed latent scores
//! `z = α + xδ + η`, fitted by Gibbs sampling with data augmentation. The
//! posterior mean of `δ` then scores every household in a census, and the
//! lowest scores in each community are selected.
//!
//! Numeric types are generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the command-line tool uses.

// `!(a > b)` rejects NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod config;
pub mod data;
pub mod dist;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod linalg;
pub mod synth;
pub mod update;
mod real;

pub use error::{Error, Result};
pub use real::Real;

pub type Dataset = data::Dataset<f64>;
pub type Household = data::Household<f64>;
pub type ModelSpec = gibbs::ModelSpec<f64>;
pub type PosteriorSamples = gibbs::PosteriorSamples<f64>;
pub type ExperimentPlan = eval::ExperimentPlan<f64>;
pub type ExperimentData = eval::ExperimentData<f64>;
pub type SyntheticData = synth::SyntheticData<f64>;

//! The ranking-model engine: prior specification, conditional posteriors and
//! the Gibbs loop shared by every model variant.

mod conditionals;
mod design;
mod sampler;
mod samples;
mod spec;

pub use conditionals::{
    alpha_params, delta_params, gamma_params, latent_bounds, mu_params, omega_probs, sigma_hyper_params,
    sigma_psi_params, Gaussian,
};
pub use design::{Design, LatentState, SchemeLayout, SurveyBlock};
pub use sampler::{run_gibbs, GibbsSampler};
pub use samples::{quantile_sorted, CoefficientSummary, PosteriorSamples, INTERCEPT};
pub use spec::{DeltaPrior, McmcConfig, ModelSpec};

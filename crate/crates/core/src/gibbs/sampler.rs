use rand::Rng;

use crate::data::{argsort, Dataset};
use crate::dist::{sample_multinomial_index, sample_mvn, sample_scaled_inv_chisq, sample_truncated_normal, std_normal};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

use super::conditionals::{
    alpha_params, delta_params, gamma_params, latent_bounds, mu_params, omega_probs_with, sigma_hyper_params,
    sigma_psi_params,
};
use super::design::{Design, LatentState};
use super::samples::PosteriorSamples;
use super::spec::{McmcConfig, ModelSpec};

/// One Gibbs chain. Blocks that the spec switches off keep their initial
/// values (`α = 0`, `ω = 1`, and so on).
#[derive(Clone, Debug)]
pub struct GibbsSampler<T: Real> {
    design: Design<T>,
    spec: ModelSpec<T>,
    delta_prior: (Vec<T>, Matrix<T>),
    omega_priors: Vec<[T; 3]>,
    state: LatentState<T>,
    sweeps: u64,
}

impl<T: Real> GibbsSampler<T> {
    pub fn new(spec: &ModelSpec<T>, data: &Dataset<T>) -> Result<Self> {
        spec.validate()?;
        let design = Design::new(data, spec)?;
        Self::from_design(spec, design)
    }

    pub fn from_design(spec: &ModelSpec<T>, design: Design<T>) -> Result<Self> {
        spec.validate()?;
        let delta_prior = spec.delta_prior.resolve(design.n_covariates())?;
        let omega_priors = design.ranker_ids.iter().map(|r| spec.omega_prior_for(r)).collect();
        let state = LatentState::initial(&design);
        Ok(Self {
            design,
            spec: spec.clone(),
            delta_prior,
            omega_priors,
            state,
            sweeps: 0,
        })
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn state(&self) -> &LatentState<T> {
        &self.state
    }

    pub fn spec(&self) -> &ModelSpec<T> {
        &self.spec
    }

    /// Number of completed iterations.
    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// One full iteration over every active block, in the fixed order
    /// z̃, α, δ, γ, ω, σ²_ψ, μ, Σ.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.sample_latent(rng)?;
        if self.spec.multi_ranker {
            self.sample_alpha(rng);
        }
        self.sample_delta(rng)?;
        if self.spec.auxiliary {
            self.sample_gamma(rng)?;
        }
        if self.spec.multi_ranker {
            self.sample_omega(rng)?;
        }
        if self.spec.auxiliary {
            self.sample_hyper(rng)?;
        }
        debug_assert!(
            self.design.rank_consistent(&self.state),
            "latent scores lost their ordering at sweep {}",
            self.sweeps
        );
        self.sweeps += 1;
        Ok(())
    }

    fn sample_latent<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let eta = self.design.linear_predictor(&self.state);
        for (scheme, z) in self.design.schemes.iter().zip(self.state.z.iter_mut()) {
            let var = T::one() / self.state.omega[scheme.ranker];
            for h in 0..z.len() {
                let (lo, hi) = latent_bounds(z, h);
                z[h] = sample_truncated_normal(eta[scheme.order[h]], var, lo, hi, rng)?;
            }
        }
        Ok(())
    }

    fn sample_alpha<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (mean, var) = alpha_params(&self.design, &self.state);
        for ((a, m), v) in self.state.alpha.iter_mut().zip(mean).zip(var) {
            *a = m + v.sqrt() * T::lit(std_normal(rng));
        }
    }

    fn sample_delta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let g = if self.spec.auxiliary {
            let p = self.design.n_covariates();
            let cov = Matrix::from_diagonal(&vec![self.state.sigma; p]);
            delta_params(&self.design, &self.state, &self.state.mu, &cov)?
        } else {
            delta_params(&self.design, &self.state, &self.delta_prior.0, &self.delta_prior.1)?
        };
        self.state.delta = sample_mvn(&g.mean, &g.cov, rng)?;
        Ok(())
    }

    fn sample_gamma<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let survey = self.design.survey.as_ref().expect("auxiliary design has a survey block");
        let mut mean = self.state.mu.clone();
        mean.push(T::zero());
        let mut var = vec![self.state.sigma; self.state.mu.len()];
        var.push(self.spec.intercept_variance);
        let g = gamma_params(survey, self.state.sigma_psi, &mean, &Matrix::from_diagonal(&var))?;
        self.state.gamma = sample_mvn(&g.mean, &g.cov, rng)?;
        Ok(())
    }

    fn sample_omega<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let eta = self.design.linear_predictor(&self.state);
        for r in 0..self.design.n_rankers() {
            let probs = omega_probs_with(
                &self.design,
                &self.state,
                &eta,
                r,
                &self.spec.omega_support,
                &self.omega_priors[r],
            );
            let l = sample_multinomial_index(&probs, rng)?;
            self.state.omega[r] = self.spec.omega_support[l];
        }
        Ok(())
    }

    fn sample_hyper<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let p = self.design.n_covariates();
        let survey = self.design.survey.as_ref().expect("auxiliary design has a survey block");
        let (df, scale) = sigma_psi_params(survey, &self.state.gamma);
        self.state.sigma_psi = sample_scaled_inv_chisq(df, scale, rng)?;

        let slopes = &self.state.gamma[..p];
        let (mean, var) = mu_params(&self.state.delta, slopes, self.state.sigma);
        let sd = var.sqrt();
        self.state.mu = mean.into_iter().map(|m| m + sd * T::lit(std_normal(rng))).collect();

        let (df, scale) = sigma_hyper_params(&self.state.delta, &self.state.gamma[..p], &self.state.mu);
        self.state.sigma = sample_scaled_inv_chisq(df, scale, rng)?;
        Ok(())
    }

    /// Replaces the observed rankings with fresh ones simulated from the
    /// current parameters. Alternating this with [`GibbsSampler::step`]
    /// targets the joint prior of parameters and data, which is what a
    /// successive-conditional correctness check needs.
    pub fn regenerate_rankings<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let eta = self.design.linear_predictor(&self.state);
        for (scheme, z) in self.design.schemes.iter_mut().zip(self.state.z.iter_mut()) {
            let sd = (T::one() / self.state.omega[scheme.ranker]).sqrt();
            let fresh: Vec<T> = scheme
                .order
                .iter()
                .map(|&i| eta[i] + sd * T::lit(std_normal(rng)))
                .collect();
            let idx = argsort(&fresh);
            scheme.order = idx.iter().map(|&k| scheme.order[k]).collect();
            *z = idx.iter().map(|&k| fresh[k]).collect();
        }
    }

    /// Runs `cfg.total_iterations` sweeps and keeps the last
    /// `total_iterations − burn_in`.
    pub fn run<R: Rng + ?Sized>(mut self, cfg: &McmcConfig, rng: &mut R) -> Result<PosteriorSamples<T>> {
        cfg.validate()?;
        let mut out = PosteriorSamples::empty(&self.design, &self.spec, cfg);
        for it in 0..cfg.total_iterations {
            self.step(rng)?;
            if it >= cfg.burn_in {
                out.push(&self.state, cfg.retain_latent);
            }
        }
        out.check_finite()?;
        Ok(out)
    }
}

/// Fits `spec` to `data` and returns the retained draws.
pub fn run_gibbs<T: Real, R: Rng + ?Sized>(
    spec: &ModelSpec<T>,
    data: &Dataset<T>,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorSamples<T>> {
    if spec.auxiliary && data.surveyed().next().is_none() {
        return Err(Error::InvalidConfig("auxiliary model requires survey households".into()));
    }
    log::debug!(
        "fitting {} households, {} rankings (multi_ranker={}, auxiliary={}, prior={})",
        data.households.len(),
        data.rankings.len(),
        spec.multi_ranker,
        spec.auxiliary,
        spec.prior_source
    );
    GibbsSampler::new(spec, data)?.run(cfg, rng)
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

/// Prior on the preference weights `δ` when no auxiliary survey is used.
#[derive(Clone, Debug, PartialEq)]
pub enum DeltaPrior<T> {
    /// `N(mean·1, variance·I)`, sized to the data at fit time.
    Isotropic { mean: T, variance: T },
    /// Fully specified multivariate normal.
    Gaussian { mean: Vec<T>, cov: Matrix<T> },
}

impl<T: Real> DeltaPrior<T> {
    /// Mean vector and covariance for `p` covariates.
    pub fn resolve(&self, p: usize) -> Result<(Vec<T>, Matrix<T>)> {
        match self {
            DeltaPrior::Isotropic { mean, variance } => {
                if !(*variance > T::zero()) {
                    return Err(Error::InvalidConfig("prior variance must be positive".into()));
                }
                Ok((vec![*mean; p], Matrix::from_diagonal(&vec![*variance; p])))
            }
            DeltaPrior::Gaussian { mean, cov } => {
                if mean.len() != p || cov.rows() != p || !cov.is_square() {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: mean.len(),
                    });
                }
                cov.cholesky()?;
                Ok((mean.clone(), cov.clone()))
            }
        }
    }
}

/// Which model blocks are active, and every prior hyperparameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec<T = f64> {
    /// Household random effects `α` and per-ranker precisions `ω`.
    pub multi_ranker: bool,
    /// Joint model with survey expenditure through the shared `(μ, Σ)` prior.
    pub auxiliary: bool,
    /// Covariate columns measuring elite connections (zeroed when scoring).
    pub elite_cols: Vec<usize>,
    /// Used only when `auxiliary` is off.
    pub delta_prior: DeltaPrior<T>,
    /// Values `ω_r` may take, ordered low to high quality.
    pub omega_support: [T; 3],
    /// Per-ranker prior probabilities over `omega_support`.
    pub omega_prior: BTreeMap<String, [T; 3]>,
    /// Prior probabilities for rankers missing from `omega_prior`.
    pub default_omega_prior: [T; 3],
    /// Variance of the independent normal prior on the survey intercept.
    pub intercept_variance: T,
    /// Free-form note on where the priors came from (logged with fits).
    pub prior_source: String,
}

impl<T: Real> Default for ModelSpec<T> {
    fn default() -> Self {
        let third = T::one() / T::lit(3.0);
        Self {
            multi_ranker: false,
            auxiliary: false,
            elite_cols: Vec::new(),
            delta_prior: DeltaPrior::Isotropic {
                mean: T::zero(),
                variance: T::lit(6.25),
            },
            omega_support: [T::lit(0.5), T::one(), T::lit(2.0)],
            omega_prior: BTreeMap::new(),
            default_omega_prior: [third; 3],
            intercept_variance: T::lit(1e6),
            prior_source: "default".into(),
        }
    }
}

impl<T: Real> ModelSpec<T> {
    /// Single latent ordering per community, `α ≡ 0`, `ω ≡ 1`.
    pub fn basic() -> Self {
        Self::default()
    }

    pub fn multi_ranker() -> Self {
        Self {
            multi_ranker: true,
            ..Self::default()
        }
    }

    pub fn with_auxiliary(mut self) -> Self {
        self.auxiliary = true;
        self
    }

    pub fn with_elite_cols(mut self, cols: Vec<usize>) -> Self {
        self.elite_cols = cols;
        self
    }

    pub fn omega_prior_for(&self, ranker: &str) -> [T; 3] {
        self.omega_prior
            .get(ranker)
            .copied()
            .unwrap_or(self.default_omega_prior)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_support.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::InvalidConfig("omega support values must be positive".into()));
        }
        let check = |name: &str, a: &[T; 3]| -> Result<()> {
            let sum: f64 = a.iter().map(|v| v.as_f64()).sum();
            if a.iter().any(|&v| v < T::zero()) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "omega prior for `{name}` must be nonnegative and sum to 1"
                )));
            }
            Ok(())
        };
        check("default", &self.default_omega_prior)?;
        for (r, a) in &self.omega_prior {
            check(r, a)?;
        }
        if !(self.intercept_variance > T::zero()) {
            return Err(Error::InvalidConfig("intercept variance must be positive".into()));
        }
        Ok(())
    }
}

/// Chain length settings. Retained draws `B = total_iterations − burn_in`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McmcConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Keep every retained latent vector (diagnostics only; memory heavy).
    pub retain_latent: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            total_iterations: 4000,
            burn_in: 2000,
            seed: 0,
            retain_latent: false,
        }
    }
}

impl McmcConfig {
    pub fn new(total_iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self {
            total_iterations,
            burn_in,
            seed,
            retain_latent: false,
        }
    }

    pub fn retained(&self) -> usize {
        self.total_iterations.saturating_sub(self.burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iterations {
            return Err(Error::InvalidConfig(format!(
                "burn-in {} must be smaller than total iterations {}",
                self.burn_in, self.total_iterations
            )));
        }
        Ok(())
    }
}

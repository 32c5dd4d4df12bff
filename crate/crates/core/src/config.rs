//! TOML run configuration: model variant, priors, chain settings, and the
//! optional experiment plan and generator sections.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::ColumnKind;
use crate::error::{Error, Result};
use crate::eval::{ExperimentPlan, Method};
use crate::gibbs::{DeltaPrior, McmcConfig, ModelSpec};
use crate::linalg::Matrix;
use crate::real::Real;
use crate::synth::{GenConfig, AUX, TEST, TRAIN};
use crate::update::{NormalPrior, UpdatedPrior, DEFAULT_INFLATION, DEFAULT_SHRINK};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub prior: PriorSection,
    pub mcmc: McmcSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub multi_ranker: bool,
    pub auxiliary: bool,
    /// Names of covariates measuring elite connections.
    pub elite: Vec<String>,
    /// Covariates to treat as binary when standardizing, whatever their values.
    pub binary: Vec<String>,
    /// Covariates to scale as continuous even if they only hold 0 and 1.
    pub continuous: Vec<String>,
}

impl ModelSection {
    /// Column kinds forced by the `binary` and `continuous` lists.
    pub fn column_kinds(&self, covariates: &[String]) -> Result<BTreeMap<String, ColumnKind>> {
        if let Some(n) = self.binary.iter().chain(&self.continuous).find(|n| !covariates.contains(n)) {
            return Err(Error::InvalidConfig(format!("unknown covariate `{n}` in [model]")));
        }
        let mut kinds = BTreeMap::new();
        for n in &self.binary {
            kinds.insert(n.clone(), ColumnKind::Binary);
        }
        for n in &self.continuous {
            if kinds.insert(n.clone(), ColumnKind::Continuous).is_some() {
                return Err(Error::InvalidConfig(format!("covariate `{n}` listed as both binary and continuous")));
            }
        }
        Ok(kinds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub source: String,
    /// Isotropic prior used for covariates without an entry in `delta`.
    pub delta_mean: f64,
    pub delta_variance: f64,
    pub intercept_variance: f64,
    pub omega_support: [f64; 3],
    pub omega_default: [f64; 3],
    /// Per-ranker probabilities over `omega_support`.
    pub omega: BTreeMap<String, [f64; 3]>,
    /// Per-coefficient independent normal priors.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<CoefficientPrior>,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self {
            source: "default".into(),
            delta_mean: 0.0,
            delta_variance: 6.25,
            intercept_variance: 1e6,
            omega_support: [0.5, 1.0, 2.0],
            omega_default: [1.0 / 3.0; 3],
            omega: BTreeMap::new(),
            delta: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientPrior {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub retain_latent: bool,
}

impl Default for McmcSection {
    fn default() -> Self {
        let d = McmcConfig::default();
        Self {
            total_iterations: d.total_iterations,
            burn_in: d.burn_in,
            retain_latent: d.retain_latent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub du_inflation: f64,
    pub du_shrink: f64,
    pub train_label: String,
    pub test_label: String,
    pub aux_label: String,
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            sizes: vec![5, 15, 30],
            replications: 30,
            methods: vec![Method::Hybrid, Method::Probit, Method::Pmt, Method::Random],
            du_inflation: DEFAULT_INFLATION,
            du_shrink: DEFAULT_SHRINK,
            train_label: TRAIN.into(),
            test_label: TEST.into(),
            aux_label: AUX.into(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Model specification for data with the given covariate names.
    pub fn to_spec<T: Real>(&self, covariates: &[String]) -> Result<ModelSpec<T>> {
        let p = &self.prior;
        let index = |name: &str| {
            covariates
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown covariate `{name}`")))
        };
        let elite_cols = self.model.elite.iter().map(|n| index(n)).collect::<Result<Vec<_>>>()?;
        let delta_prior = if p.delta.is_empty() {
            DeltaPrior::Isotropic {
                mean: T::lit(p.delta_mean),
                variance: T::lit(p.delta_variance),
            }
        } else {
            let mut mean = vec![T::lit(p.delta_mean); covariates.len()];
            let mut var = vec![T::lit(p.delta_variance); covariates.len()];
            for c in &p.delta {
                let j = index(&c.name)?;
                mean[j] = T::lit(c.mean);
                var[j] = T::lit(c.variance);
            }
            DeltaPrior::Gaussian {
                mean,
                cov: Matrix::from_diagonal(&var),
            }
        };
        let spec = ModelSpec {
            multi_ranker: self.model.multi_ranker,
            auxiliary: self.model.auxiliary,
            elite_cols,
            delta_prior,
            omega_support: p.omega_support.map(T::lit),
            omega_prior: p.omega.iter().map(|(r, a)| (r.clone(), a.map(T::lit))).collect(),
            default_omega_prior: p.omega_default.map(T::lit),
            intercept_variance: T::lit(p.intercept_variance),
            prior_source: p.source.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mcmc_config(&self, seed: u64) -> Result<McmcConfig> {
        let cfg = McmcConfig {
            total_iterations: self.mcmc.total_iterations,
            burn_in: self.mcmc.burn_in,
            seed,
            retain_latent: self.mcmc.retain_latent,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Experiment plan; the default plan when the section is absent.
    pub fn experiment_plan<T: Real>(&self, covariates: &[String], seed: u64) -> Result<ExperimentPlan<T>> {
        let s = self.plan.clone().unwrap_or_default();
        let plan = ExperimentPlan {
            sizes: s.sizes,
            replications: s.replications,
            seed,
            methods: s.methods,
            spec: self.to_spec(covariates)?,
            mcmc: self.mcmc_config(seed)?,
            du_inflation: s.du_inflation,
            du_shrink: s.du_shrink,
            train_label: s.train_label,
            test_label: s.test_label,
            aux_label: s.aux_label,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// This configuration with its priors replaced by `up`.
    pub fn with_updated_prior(mut self, up: &UpdatedPrior) -> Self {
        self.prior.delta = up
            .delta
            .iter()
            .map(|NormalPrior { name, mean, variance }| CoefficientPrior {
                name: name.clone(),
                mean: *mean,
                variance: *variance,
            })
            .collect();
        self.prior.omega_support = up.omega_support;
        self.prior.omega.extend(up.omega.iter().map(|(r, a)| (r.clone(), *a)));
        self.prior.source = format!(
            "updated (period {}, inflation {}, shrink {})",
            up.period, up.inflation, up.shrink
        );
        self
    }
}

//! Turning one period's posterior into the next period's prior.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gibbs::{DeltaPrior, ModelSpec, PosteriorSamples};
use crate::linalg::Matrix;
use crate::real::Real;

pub const DEFAULT_INFLATION: f64 = 1.5;
pub const DEFAULT_SHRINK: f64 = 0.1;
const VARIANCE_FLOOR: f64 = 1e-6;

/// Independent normal prior on one coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalPrior {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
}

/// Priors for a later period built from an earlier fit.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdatedPrior {
    pub delta: Vec<NormalPrior>,
    /// Per-ranker probabilities over the precision support.
    pub omega: BTreeMap<String, [f64; 3]>,
    pub omega_support: [f64; 3],
    pub inflation: f64,
    pub shrink: f64,
    /// Period the prior is meant for.
    pub period: u32,
}

/// Per-coefficient mean and inflated variance of the `δ` draws.
///
/// The variance is the plain mean squared deviation of the draws, times
/// `inflation`, floored at `1e-6`.
pub fn approximate_delta_prior<T: Real>(samples: &PosteriorSamples<T>, inflation: f64) -> Result<Vec<NormalPrior>> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 2 draws, have {}",
            samples.len()
        )));
    }
    if !(inflation >= 1.0) || !inflation.is_finite() {
        return Err(Error::InvalidParam(format!("inflation must be at least 1, got {inflation}")));
    }
    let means = samples.delta_mean();
    Ok(samples
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let m = means[j].as_f64();
            let var = samples
                .delta
                .iter()
                .map(|d| (d[j].as_f64() - m).powi(2))
                .sum::<f64>()
                / samples.len() as f64;
            NormalPrior {
                name: name.clone(),
                mean: m,
                variance: (var * inflation).max(VARIANCE_FLOOR),
            }
        })
        .collect())
}

/// Empirical frequency of each precision value per ranker, blended with
/// the uniform distribution: `(1 − shrink)·freq + shrink/3`.
pub fn approximate_omega_prior<T: Real>(samples: &PosteriorSamples<T>, shrink: f64) -> Result<BTreeMap<String, [f64; 3]>> {
    if !(0.0..=1.0).contains(&shrink) {
        return Err(Error::InvalidParam(format!("shrink must lie in [0, 1], got {shrink}")));
    }
    if samples.omega.is_none() || samples.is_empty() {
        return Err(Error::InsufficientSamples("no ranker precision draws".into()));
    }
    Ok(samples
        .ranker_ids
        .iter()
        .enumerate()
        .map(|(r, id)| {
            let f = samples.omega_frequencies(r).expect("omega draws present");
            (id.clone(), f.map(|p| (1.0 - shrink) * p + shrink / 3.0))
        })
        .collect())
}

/// Both approximations together. Ranker priors are included only when the
/// fit sampled precisions.
pub fn compose_updated_priors<T: Real>(samples: &PosteriorSamples<T>, inflation: f64, shrink: f64) -> Result<UpdatedPrior> {
    let delta = approximate_delta_prior(samples, inflation)?;
    let omega = if samples.omega.is_some() {
        approximate_omega_prior(samples, shrink)?
    } else {
        BTreeMap::new()
    };
    Ok(UpdatedPrior {
        delta,
        omega,
        omega_support: samples.omega_support.map(|w| w.as_f64()),
        inflation,
        shrink,
        period: 2,
    })
}

impl UpdatedPrior {
    pub fn at_period(mut self, period: u32) -> Self {
        self.period = period;
        self
    }

    /// Installs these priors into `spec`: independent normals on `δ`,
    /// matched to `covariates` by name, and per-ranker precision priors.
    pub fn apply<T: Real>(&self, spec: &ModelSpec<T>, covariates: &[String]) -> Result<ModelSpec<T>> {
        let mut mean = Vec::with_capacity(covariates.len());
        let mut var = Vec::with_capacity(covariates.len());
        for name in covariates {
            let p = self
                .delta
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| Error::InvalidConfig(format!("updated prior has no coefficient `{name}`")))?;
            mean.push(T::lit(p.mean));
            var.push(T::lit(p.variance));
        }
        let mut out = spec.clone();
        out.delta_prior = DeltaPrior::Gaussian {
            mean,
            cov: Matrix::from_diagonal(&var),
        };
        for (r, a) in &self.omega {
            out.omega_prior.insert(r.clone(), a.map(T::lit));
        }
        out.omega_support = self.omega_support.map(T::lit);
        out.prior_source = format!(
            "updated (period {}, inflation {}, shrink {})",
            self.period, self.inflation, self.shrink
        );
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::McmcConfig;

    fn samples(delta: Vec<Vec<f64>>, omega: Option<Vec<Vec<f64>>>) -> PosteriorSamples {
        PosteriorSamples {
            covariate_names: (0..delta[0].len()).map(|j| format!("x{j}")).collect(),
            ranker_ids: vec!["r1".into()],
            household_ids: vec![],
            household_communities: vec![],
            omega_support: [0.5, 1.0, 2.0],
            elite_cols: vec![],
            prior_source: "default".into(),
            config: McmcConfig::new(delta.len(), 0, 0),
            delta,
            alpha: None,
            omega,
            gamma: None,
            sigma_psi: None,
            mu: None,
            sigma: None,
            latent: None,
        }
    }

    #[test]
    fn delta_examples() {
        let p = approximate_delta_prior(&samples(vec![vec![0.0], vec![2.0]], None), 2.0).unwrap();
        assert_eq!((p[0].mean, p[0].variance), (1.0, 2.0));
        let p = approximate_delta_prior(&samples(vec![vec![1.0]; 3], None), 1.5).unwrap();
        assert_eq!((p[0].mean, p[0].variance), (1.0, 1e-6));
        assert!(approximate_delta_prior(&samples(vec![vec![1.0]], None), 1.5).is_err());
        assert!(approximate_delta_prior(&samples(vec![vec![1.0]; 3], None), 0.5).is_err());
    }

    #[test]
    fn omega_examples() {
        let s = samples(vec![vec![0.0]; 4], Some(vec![vec![0.5]; 4]));
        assert_eq!(approximate_omega_prior(&s, 0.0).unwrap()["r1"], [1.0, 0.0, 0.0]);
        let a = approximate_omega_prior(&s, 0.5).unwrap()["r1"];
        assert!((a[0] - 2.0 / 3.0).abs() < 1e-15 && (a[1] - 1.0 / 6.0).abs() < 1e-15);
        let a = approximate_omega_prior(&s, 1.0).unwrap()["r1"];
        assert!(a.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));

        let s = samples(vec![vec![0.0]; 3], Some(vec![vec![0.5], vec![1.0], vec![2.0]]));
        for shrink in [0.0, 0.3, 1.0] {
            let a = approximate_omega_prior(&s, shrink).unwrap()["r1"];
            assert!(a.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
        }
        assert!(approximate_omega_prior(&samples(vec![vec![0.0]; 3], None), 0.1).is_err());
    }

    #[test]
    fn apply_installs_priors() {
        let s = samples(vec![vec![0.0, 1.0], vec![2.0, 1.0]], Some(vec![vec![2.0]; 2]));
        let up = compose_updated_priors(&s, 1.0, 0.1).unwrap();
        let spec = up.apply(&ModelSpec::<f64>::multi_ranker(), &["x1".into(), "x0".into()]).unwrap();
        match &spec.delta_prior {
            DeltaPrior::Gaussian { mean, cov } => {
                assert_eq!(mean, &vec![1.0, 1.0]);
                assert_eq!(cov[(0, 0)], 1e-6);
                assert_eq!(cov[(1, 1)], 1.0);
            }
            other => panic!("unexpected prior {other:?}"),
        }
        assert!(spec.omega_prior["r1"].iter().all(|&a| a > 0.0));
        assert_ne!(spec.prior_source, "default");
        assert!(up.apply(&spec, &["nope".into()]).is_err());
    }
}

use std::collections::{BTreeMap, BTreeSet};

use crate::data::Dataset;
use crate::dist::norm_quantile;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::real::Real;

use super::spec::ModelSpec;

/// One ranker's ordering of one community, as row indices into the ranked
/// design matrix from most to least needy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeLayout {
    pub community_id: String,
    /// Index into [`Design::ranker_ids`].
    pub ranker: usize,
    pub order: Vec<usize>,
}

/// Survey block `y = φ + Xγ + ψ`. The design carries a trailing constant
/// column, so the last element of `γ` is the intercept `φ`.
#[derive(Clone, Debug)]
pub struct SurveyBlock<T> {
    pub household_ids: Vec<String>,
    pub x: Matrix<T>,
    pub y: Vec<T>,
    /// `XᵀX` and `Xᵀy`, fixed for the life of the chain.
    pub(crate) xtx: Matrix<T>,
    pub(crate) xty: Vec<T>,
}

impl<T: Real> SurveyBlock<T> {
    pub fn new(household_ids: Vec<String>, x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        if x.rows() != y.len() || household_ids.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.len(),
            });
        }
        let k = x.cols();
        let mut xtx = Matrix::zeros(k, k);
        let mut xty = vec![T::zero(); k];
        for (m, &ym) in y.iter().enumerate() {
            let xm = x.row(m);
            xtx.add_outer(xm, T::one());
            for j in 0..k {
                xty[j] = xty[j] + xm[j] * ym;
            }
        }
        Ok(Self {
            household_ids,
            x,
            y,
            xtx,
            xty,
        })
    }
}

/// Data laid out for the sampler: ranked households, their rankings, and
/// the optional survey block.
#[derive(Clone, Debug)]
pub struct Design<T> {
    pub covariate_names: Vec<String>,
    pub household_ids: Vec<String>,
    pub household_communities: Vec<String>,
    /// Covariates of ranked households, one row each.
    pub x: Matrix<T>,
    pub schemes: Vec<SchemeLayout>,
    pub ranker_ids: Vec<String>,
    pub survey: Option<SurveyBlock<T>>,
    /// Per ranker, `Σ x_i x_iᵀ` over the households it ranks.
    pub(crate) ranker_gram: Vec<Matrix<T>>,
}

impl<T: Real> Design<T> {
    pub fn new(data: &Dataset<T>, spec: &ModelSpec<T>) -> Result<Self> {
        if data.rankings.is_empty() {
            return Err(Error::InvalidConfig("no rankings to fit".into()));
        }
        let p = data.n_covariates();
        let mut ranked: BTreeSet<(&str, &str)> = BTreeSet::new();
        for s in &data.rankings {
            for h in s.ranks().keys() {
                ranked.insert((s.community_id.as_str(), h.as_str()));
            }
        }
        let mut row_of = BTreeMap::new();
        let mut household_ids = Vec::with_capacity(ranked.len());
        let mut household_communities = Vec::with_capacity(ranked.len());
        let mut xs = Vec::with_capacity(ranked.len() * p);
        for (i, (c, h)) in ranked.iter().enumerate() {
            let hh = data.household(h).ok_or_else(|| Error::UnknownHousehold(h.to_string()))?;
            row_of.insert(*h, i);
            household_ids.push(h.to_string());
            household_communities.push(c.to_string());
            xs.extend_from_slice(&hh.x);
        }
        let x = Matrix::from_vec(household_ids.len(), p, xs)?;

        let ranker_ids: Vec<String> = data
            .rankings
            .iter()
            .map(|s| s.ranker_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut sorted: Vec<_> = data.rankings.iter().collect();
        sorted.sort_by(|a, b| (&a.community_id, &a.ranker_id).cmp(&(&b.community_id, &b.ranker_id)));
        let schemes = sorted
            .into_iter()
            .map(|s| SchemeLayout {
                community_id: s.community_id.clone(),
                ranker: ranker_ids.binary_search(&s.ranker_id).expect("ranker listed"),
                order: s.order().iter().map(|h| row_of[h]).collect(),
            })
            .collect();

        let survey = if spec.auxiliary {
            let surveyed: Vec<_> = data.surveyed().collect();
            if surveyed.is_empty() {
                return Err(Error::InvalidConfig(
                    "auxiliary model requires households with expenditure".into(),
                ));
            }
            let mut sx = Vec::with_capacity(surveyed.len() * (p + 1));
            for h in &surveyed {
                sx.extend_from_slice(&h.x);
                sx.push(T::one());
            }
            Some(SurveyBlock::new(
                surveyed.iter().map(|h| h.id.clone()).collect(),
                Matrix::from_vec(surveyed.len(), p + 1, sx)?,
                surveyed.iter().map(|h| h.y.expect("filtered")).collect(),
            )?)
        } else {
            None
        };

        Self::from_layout(
            data.schema.names.clone(),
            household_ids,
            household_communities,
            x,
            schemes,
            ranker_ids,
            survey,
        )
    }

    /// Assembles a design from already laid-out parts.
    pub fn from_layout(
        covariate_names: Vec<String>,
        household_ids: Vec<String>,
        household_communities: Vec<String>,
        x: Matrix<T>,
        schemes: Vec<SchemeLayout>,
        ranker_ids: Vec<String>,
        survey: Option<SurveyBlock<T>>,
    ) -> Result<Self> {
        let p = x.cols();
        if covariate_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: covariate_names.len(),
            });
        }
        let mut ranker_gram = vec![Matrix::zeros(p, p); ranker_ids.len()];
        for s in &schemes {
            let g = ranker_gram.get_mut(s.ranker).ok_or_else(|| {
                Error::InvalidConfig(format!("scheme refers to ranker {} of {}", s.ranker, ranker_ids.len()))
            })?;
            for &i in &s.order {
                if i >= x.rows() {
                    return Err(Error::DimensionMismatch {
                        expected: x.rows(),
                        found: i + 1,
                    });
                }
                g.add_outer(x.row(i), T::one());
            }
        }
        Ok(Self {
            covariate_names,
            household_ids,
            household_communities,
            x,
            schemes,
            ranker_ids,
            survey,
            ranker_gram,
        })
    }

    pub fn n_covariates(&self) -> usize {
        self.x.cols()
    }

    pub fn n_households(&self) -> usize {
        self.x.rows()
    }

    pub fn n_rankers(&self) -> usize {
        self.ranker_ids.len()
    }

    /// `α_i + x_i δ` for every ranked household.
    pub fn linear_predictor(&self, state: &LatentState<T>) -> Vec<T> {
        (0..self.n_households())
            .map(|i| state.alpha[i] + dot(self.x.row(i), &state.delta))
            .collect()
    }

    /// True when every latent vector reproduces its observed ordering.
    pub fn rank_consistent(&self, state: &LatentState<T>) -> bool {
        state
            .z
            .iter()
            .all(|z| z.windows(2).all(|w| w[0] < w[1]))
    }
}

/// Current value of every block of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState<T> {
    /// Latent scores per scheme, stored in ascending rank order, so the
    /// ranking holds iff each vector is strictly increasing.
    pub z: Vec<Vec<T>>,
    pub alpha: Vec<T>,
    pub delta: Vec<T>,
    /// Precision per ranker (indexed like [`Design::ranker_ids`]).
    pub omega: Vec<T>,
    /// Survey slopes followed by the intercept.
    pub gamma: Vec<T>,
    pub sigma_psi: T,
    pub mu: Vec<T>,
    /// Common diagonal element of the shared prior covariance.
    pub sigma: T,
}

impl<T: Real> LatentState<T> {
    /// Zero effects, unit precisions and variances, and latent scores at the
    /// standard normal quantiles `h/(n+1)` of each ranking.
    pub fn initial(design: &Design<T>) -> Self {
        let p = design.n_covariates();
        let z = design
            .schemes
            .iter()
            .map(|s| {
                let n = s.order.len() as f64;
                (0..s.order.len())
                    .map(|h| T::lit(norm_quantile((h as f64 + 1.0) / (n + 1.0))))
                    .collect()
            })
            .collect();
        Self {
            z,
            alpha: vec![T::zero(); design.n_households()],
            delta: vec![T::zero(); p],
            omega: vec![T::one(); design.n_rankers()],
            gamma: vec![T::zero(); p + 1],
            sigma_psi: T::one(),
            mu: vec![T::zero(); p],
            sigma: T::one(),
        }
    }
}

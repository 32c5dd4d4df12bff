use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

use super::scaling::{standardize_covariates_with, ColumnKind, ScalingInfo};

/// A potential beneficiary.
#[derive(Clone, Debug, PartialEq)]
pub struct Household<T = f64> {
    pub id: String,
    pub community_id: String,
    /// Covariates in schema column order.
    pub x: Vec<T>,
    /// Log expenditure per capita; present only for surveyed households.
    pub y: Option<T>,
}

/// Column names shared by every household of a dataset, and which of them
/// measure elite connections.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CovariateSchema {
    pub names: Vec<String>,
    pub elite_cols: Vec<usize>,
}

impl CovariateSchema {
    /// Columns whose name starts with `elite_` are treated as elite connections.
    pub fn from_names(names: Vec<String>) -> Self {
        let elite_cols = names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with("elite_"))
            .map(|(i, _)| i)
            .collect();
        Self { names, elite_cols }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One ranker's ordering of the households of one community.
/// Rank 1 is the most needy household.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankingScheme {
    pub community_id: String,
    pub ranker_id: String,
    ranks: BTreeMap<String, usize>,
}

impl RankingScheme {
    pub fn new(
        community_id: impl Into<String>,
        ranker_id: impl Into<String>,
        ranks: BTreeMap<String, usize>,
    ) -> Result<Self> {
        let community_id = community_id.into();
        let ranker_id = ranker_id.into();
        let n = ranks.len();
        let mut seen = vec![false; n];
        for &r in ranks.values() {
            if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
                return Err(Error::NotAPermutation {
                    community: community_id,
                    ranker: ranker_id,
                    n,
                });
            }
        }
        Ok(Self {
            community_id,
            ranker_id,
            ranks,
        })
    }

    /// Builds a scheme from household ids listed most-needy first.
    pub fn from_order<S: AsRef<str>>(community_id: &str, ranker_id: &str, order: &[S]) -> Result<Self> {
        let ranks = order
            .iter()
            .enumerate()
            .map(|(i, h)| (h.as_ref().to_string(), i + 1))
            .collect::<BTreeMap<_, _>>();
        if ranks.len() != order.len() {
            return Err(Error::NotAPermutation {
                community: community_id.into(),
                ranker: ranker_id.into(),
                n: order.len(),
            });
        }
        Self::new(community_id, ranker_id, ranks)
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn ranks(&self) -> &BTreeMap<String, usize> {
        &self.ranks
    }

    pub fn rank(&self, household: &str) -> Option<usize> {
        self.ranks.get(household).copied()
    }

    /// Household ids in ascending rank order (most needy first).
    pub fn order(&self) -> Vec<&str> {
        let mut v = vec![""; self.ranks.len()];
        for (h, &r) in &self.ranks {
            v[r - 1] = h.as_str();
        }
        v
    }

    pub fn households(&self) -> BTreeSet<&str> {
        self.ranks.keys().map(String::as_str).collect()
    }
}

/// Households, rankings and quotas for one targeting exercise.
#[derive(Clone, Debug)]
pub struct Dataset<T = f64> {
    pub households: Vec<Household<T>>,
    pub rankings: Vec<RankingScheme>,
    pub quotas: BTreeMap<String, usize>,
    pub schema: CovariateSchema,
    pub scaling: ScalingInfo<T>,
    index: HashMap<String, usize>,
}

impl<T: Real> Dataset<T> {
    /// Validates and assembles a dataset. Covariates are taken as given
    /// (identity scaling); see [`Dataset::standardized`].
    pub fn new(
        households: Vec<Household<T>>,
        rankings: Vec<RankingScheme>,
        quotas: BTreeMap<String, usize>,
        schema: CovariateSchema,
    ) -> Result<Self> {
        let p = schema.len();
        let mut index = HashMap::with_capacity(households.len());
        for (i, h) in households.iter().enumerate() {
            if h.x.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: h.x.len(),
                });
            }
            if index.insert(h.id.clone(), i).is_some() {
                return Err(Error::DuplicateHouseholdId(h.id.clone()));
            }
        }
        if let Some(&c) = schema.elite_cols.iter().find(|&&c| c >= p) {
            return Err(Error::InvalidConfig(format!("elite column {c} out of range")));
        }
        let mut sets: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for scheme in &rankings {
            for hid in scheme.ranks().keys() {
                let &i = index.get(hid).ok_or_else(|| Error::UnknownHousehold(hid.clone()))?;
                if households[i].community_id != scheme.community_id {
                    return Err(Error::CommunityMismatch {
                        household: hid.clone(),
                        expected: households[i].community_id.clone(),
                        found: scheme.community_id.clone(),
                    });
                }
            }
            let set = scheme.households();
            match sets.get(scheme.community_id.as_str()) {
                Some(prev) if *prev != set => return Err(Error::SetMismatch),
                Some(_) => {}
                None => {
                    sets.insert(scheme.community_id.as_str(), set);
                }
            }
        }
        let mut seen = BTreeSet::new();
        for s in &rankings {
            if !seen.insert((s.community_id.as_str(), s.ranker_id.as_str())) {
                return Err(Error::InvalidConfig(format!(
                    "ranker `{}` ranks community `{}` twice",
                    s.ranker_id, s.community_id
                )));
            }
        }
        let ds = Self {
            scaling: ScalingInfo::identity(p),
            households,
            rankings,
            quotas,
            schema,
            index,
        };
        for (c, &q) in &ds.quotas {
            let size = ds.community_size(c);
            if size > 0 && (q < 1 || q > size) {
                return Err(Error::InvalidQuota {
                    community: c.clone(),
                    quota: q,
                    size,
                });
            }
        }
        Ok(ds)
    }

    /// Returns a copy with covariates standardized over all households.
    pub fn standardized(&self) -> Result<Self> {
        self.standardized_with(&BTreeMap::new())
    }

    /// As [`Dataset::standardized`], with column kinds forced by name.
    pub fn standardized_with(&self, kinds: &BTreeMap<String, ColumnKind>) -> Result<Self> {
        let (scaled, info) = standardize_covariates_with(&self.covariate_matrix(), &self.schema.names, kinds)?;
        let mut out = self.clone();
        for (i, h) in out.households.iter_mut().enumerate() {
            h.x.copy_from_slice(scaled.row(i));
        }
        out.scaling = info;
        Ok(out)
    }

    /// Applies a previously computed scaling (e.g. from training data).
    pub fn with_scaling(&self, info: ScalingInfo<T>) -> Result<Self> {
        if info.len() != self.schema.len() {
            return Err(Error::DimensionMismatch {
                expected: self.schema.len(),
                found: info.len(),
            });
        }
        let mut out = self.clone();
        for h in &mut out.households {
            info.apply_row(&mut h.x);
        }
        out.scaling = info;
        Ok(out)
    }

    pub fn n_covariates(&self) -> usize {
        self.schema.len()
    }

    pub fn household(&self, id: &str) -> Option<&Household<T>> {
        self.index.get(id).map(|&i| &self.households[i])
    }

    pub fn household_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn covariate_matrix(&self) -> Matrix<T> {
        let p = self.schema.len();
        let data = self.households.iter().flat_map(|h| h.x.iter().copied()).collect();
        Matrix::from_vec(self.households.len(), p, data).expect("household dims validated")
    }

    /// Community ids that carry at least one ranking, sorted.
    pub fn ranked_communities(&self) -> Vec<String> {
        self.rankings
            .iter()
            .map(|r| r.community_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// All community ids, sorted.
    pub fn communities(&self) -> Vec<String> {
        self.households
            .iter()
            .map(|h| h.community_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn community_households(&self, community: &str) -> Vec<&Household<T>> {
        self.households.iter().filter(|h| h.community_id == community).collect()
    }

    /// Number of ranked households if the community is ranked, otherwise
    /// the number of households in it.
    pub fn community_size(&self, community: &str) -> usize {
        self.rankings
            .iter()
            .find(|r| r.community_id == community)
            .map(RankingScheme::len)
            .unwrap_or_else(|| self.households.iter().filter(|h| h.community_id == community).count())
    }

    pub fn surveyed(&self) -> impl Iterator<Item = &Household<T>> {
        self.households.iter().filter(|h| h.y.is_some())
    }

    /// Restricts the dataset to the given communities.
    pub fn subset(&self, communities: &BTreeSet<String>) -> Result<Self> {
        let households = self
            .households
            .iter()
            .filter(|h| communities.contains(&h.community_id))
            .cloned()
            .collect();
        let rankings = self
            .rankings
            .iter()
            .filter(|r| communities.contains(&r.community_id))
            .cloned()
            .collect();
        let quotas = self
            .quotas
            .iter()
            .filter(|(c, _)| communities.contains(*c))
            .map(|(c, &q)| (c.clone(), q))
            .collect();
        let mut ds = Self::new(households, rankings, quotas, self.schema.clone())?;
        ds.scaling = self.scaling.clone();
        Ok(ds)
    }

    /// Drops every ranking; used for survey-only subsets.
    pub fn without_rankings(mut self) -> Self {
        self.rankings.clear();
        self
    }

    /// Drops expenditure from every household.
    pub fn without_expenditure(mut self) -> Self {
        for h in &mut self.households {
            h.y = None;
        }
        self
    }
}

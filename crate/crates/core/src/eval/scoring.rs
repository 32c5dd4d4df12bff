use std::collections::{BTreeMap, BTreeSet};

use crate::data::{rank_of, Dataset, RankingScheme};
use crate::error::{Error, Result};
use crate::gibbs::PosteriorSamples;
use crate::linalg::{dot, Matrix};
use crate::real::Real;

/// `x·δ` per row, with the weights on `elite_cols` set to zero.
pub fn compute_scores<T: Real>(x: &Matrix<T>, delta: &[T], elite_cols: &[usize]) -> Result<Vec<T>> {
    if x.cols() != delta.len() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            found: delta.len(),
        });
    }
    let mut d = delta.to_vec();
    for &c in elite_cols {
        let slot = d.get_mut(c).ok_or(Error::DimensionMismatch {
            expected: delta.len(),
            found: c + 1,
        })?;
        *slot = T::zero();
    }
    Ok((0..x.rows()).map(|i| dot(x.row(i), &d)).collect())
}

/// Scores every household of `data`, keyed by household id.
pub fn score_households<T: Real>(data: &Dataset<T>, delta: &[T], elite_cols: &[usize]) -> Result<BTreeMap<String, T>> {
    let scores = compute_scores(&data.covariate_matrix(), delta, elite_cols)?;
    Ok(data.households.iter().map(|h| h.id.clone()).zip(scores).collect())
}

/// The `quota` lowest-scoring households; equal scores are broken by
/// household id.
pub fn select_beneficiaries<T: Real>(scores: &[(&str, T)], quota: usize) -> Result<BTreeSet<String>> {
    if quota > scores.len() {
        return Err(Error::InvalidQuota {
            community: String::new(),
            quota,
            size: scores.len(),
        });
    }
    let mut order: Vec<&(&str, T)> = scores.iter().collect();
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(b.0)));
    Ok(order.into_iter().take(quota).map(|(h, _)| h.to_string()).collect())
}

/// Per-community selections given a household → score map and quotas.
pub fn select_by_community<T: Real>(
    data: &Dataset<T>,
    scores: &BTreeMap<String, T>,
    quotas: &BTreeMap<String, usize>,
) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut by_comm: BTreeMap<&str, Vec<(&str, T)>> = BTreeMap::new();
    for h in &data.households {
        if let Some(&s) = scores.get(&h.id) {
            by_comm.entry(h.community_id.as_str()).or_default().push((h.id.as_str(), s));
        }
    }
    let mut out = BTreeMap::new();
    for (c, &q) in quotas {
        let members = by_comm.get(c.as_str()).ok_or_else(|| Error::UnknownCommunity(c.clone()))?;
        let sel = select_beneficiaries(members, q).map_err(|e| match e {
            Error::InvalidQuota { quota, size, .. } => Error::InvalidQuota {
                community: c.clone(),
                quota,
                size,
            },
            other => other,
        })?;
        out.insert(c.clone(), sel);
    }
    Ok(out)
}

/// In-sample aggregate ranking of one community: the ordering of the
/// posterior mean of `α_i + x_i δ`.
pub fn aggregate_model_ranking<T: Real>(
    samples: &PosteriorSamples<T>,
    data: &Dataset<T>,
    community: &str,
) -> Result<RankingScheme> {
    let delta = samples.delta_mean();
    let alpha = samples.alpha_mean();
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    for (i, (h, c)) in samples.household_ids.iter().zip(&samples.household_communities).enumerate() {
        if c != community {
            continue;
        }
        let hh = data.household(h).ok_or_else(|| Error::UnknownHousehold(h.clone()))?;
        ids.push(h.clone());
        scores.push(alpha[i] + dot(&hh.x, &delta));
    }
    if ids.is_empty() {
        return Err(Error::UnknownCommunity(community.to_string()));
    }
    let ranks = rank_of(&scores);
    RankingScheme::new(community, "model", ids.into_iter().zip(ranks).collect())
}

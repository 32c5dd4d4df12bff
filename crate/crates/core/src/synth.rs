//! Synthetic populations with known parameters, used to check that fits
//! recover what generated the data.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::io::{write_census, write_quotas, write_rankings, write_splits, write_survey, write_table};
use crate::data::{argsort, CovariateSchema, Dataset, Household, RankingScheme};
use crate::dist::{std_normal, RngStream};
use crate::error::{Error, Result};
use crate::real::Real;

pub const TRAIN: &str = "train";
pub const TEST: &str = "test";
pub const AUX: &str = "aux";

/// Connections to local elites: an extra binary covariate that shifts how
/// rankers see a household but not its actual welfare.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EliteConfig {
    pub prevalence: f64,
    /// Added to the latent score of connected households.
    pub effect: f64,
}

impl Default for EliteConfig {
    fn default() -> Self {
        Self {
            prevalence: 0.1,
            effect: -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_communities: usize,
    pub households_per_community: usize,
    /// Bernoulli(0.5) columns, listed first.
    pub n_binary: usize,
    /// Standard normal columns, after the binary ones.
    pub n_continuous: usize,
    pub n_rankers: usize,
    /// True preference weights, one per covariate.
    pub delta: Vec<f64>,
    /// True precision of each ranker.
    pub omega: Vec<f64>,
    /// Rankers (0-based) whose rankings are replaced by uniform permutations.
    pub shuffled_rankers: Vec<usize>,
    /// Standard deviation of the household effects.
    pub alpha_sd: f64,
    pub elite: Option<EliteConfig>,
    /// Expenditure slopes; defaults to `delta` plus `N(0, gamma_perturbation_sd²)`.
    pub gamma: Option<Vec<f64>>,
    pub gamma_perturbation_sd: f64,
    pub intercept: f64,
    /// Standard deviation of expenditure noise.
    pub expenditure_sd: f64,
    pub quota_share: f64,
    pub n_test_communities: usize,
    pub n_aux_communities: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_communities: 20,
            households_per_community: 10,
            n_binary: 2,
            n_continuous: 3,
            n_rankers: 3,
            delta: vec![1.0, -1.0, 0.6, -0.5, 0.25],
            omega: vec![2.0; 3],
            shuffled_rankers: Vec::new(),
            alpha_sd: 1.0,
            elite: None,
            gamma: None,
            gamma_perturbation_sd: 0.1,
            intercept: 1.0,
            expenditure_sd: 0.5,
            quota_share: 0.3,
            n_test_communities: 0,
            n_aux_communities: 0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn n_covariates(&self) -> usize {
        self.n_binary + self.n_continuous
    }

    pub fn covariate_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.n_binary).map(|j| format!("b{j}")).collect();
        names.extend((1..=self.n_continuous).map(|j| format!("x{j}")));
        if self.elite.is_some() {
            names.push("elite_connected".into());
        }
        names
    }

    pub fn ranker_ids(&self) -> Vec<String> {
        (1..=self.n_rankers).map(|r| format!("r{r}")).collect()
    }

    /// Beneficiaries per community: the quota share of its size, at least one.
    pub fn quota(&self) -> usize {
        ((self.quota_share * self.households_per_community as f64).round() as usize).clamp(1, self.households_per_community)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_communities == 0 || self.households_per_community == 0 || self.n_rankers == 0 {
            return bad("communities, households per community and rankers must be positive".into());
        }
        if self.n_covariates() == 0 {
            return bad("at least one covariate is required".into());
        }
        if self.delta.len() != self.n_covariates() {
            return bad(format!(
                "delta has {} entries for {} covariates",
                self.delta.len(),
                self.n_covariates()
            ));
        }
        if let Some(g) = &self.gamma {
            if g.len() != self.n_covariates() {
                return bad(format!("gamma has {} entries for {} covariates", g.len(), self.n_covariates()));
            }
        }
        if self.omega.len() != self.n_rankers || self.omega.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return bad("omega needs one positive finite value per ranker".into());
        }
        if let Some(&r) = self.shuffled_rankers.iter().find(|&&r| r >= self.n_rankers) {
            return bad(format!("shuffled ranker {r} out of range"));
        }
        if !(self.quota_share > 0.0 && self.quota_share < 1.0) {
            return bad("quota share must lie in (0, 1)".into());
        }
        if let Some(e) = &self.elite {
            if !(0.0..=1.0).contains(&e.prevalence) {
                return bad("elite prevalence must lie in [0, 1]".into());
            }
        }
        if self.alpha_sd < 0.0 || self.expenditure_sd < 0.0 || self.gamma_perturbation_sd < 0.0 {
            return bad("standard deviations must be nonnegative".into());
        }
        if self.n_test_communities + self.n_aux_communities > self.n_communities {
            return bad("test and auxiliary communities exceed the total".into());
        }
        Ok(())
    }
}

/// Everything that generated a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub intercept: f64,
    pub elite_effect: Option<f64>,
    /// `α*` per household id.
    pub alpha: BTreeMap<String, f64>,
    /// Welfare index `α* + x δ*` (elite connections excluded) per household id.
    pub score: BTreeMap<String, f64>,
    /// The quota-many lowest-index households of each community.
    pub poor: BTreeSet<String>,
}

impl Truth {
    pub fn poor_in<'a>(&'a self, households: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        households
            .into_iter()
            .filter(|h| self.poor.contains(*h))
            .map(str::to_string)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData<T = f64> {
    /// Every household carries expenditure; callers drop it where unwanted.
    pub dataset: Dataset<T>,
    pub truth: Truth,
    /// Community id to `train`, `test` or `aux`.
    pub splits: BTreeMap<String, String>,
}

/// Draws a population from `cfg` using a stream seeded by `cfg.seed`.
pub fn generate<T: Real>(cfg: &GenConfig) -> Result<SyntheticData<T>> {
    generate_dataset(cfg, &mut RngStream::new(cfg.seed, 0))
}

pub fn generate_dataset<T: Real, R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<SyntheticData<T>> {
    cfg.validate()?;
    let p = cfg.n_covariates();
    let gamma = match &cfg.gamma {
        Some(g) => g.clone(),
        None => cfg
            .delta
            .iter()
            .map(|d| d + cfg.gamma_perturbation_sd * std_normal(rng))
            .collect(),
    };
    let schema = CovariateSchema::from_names(cfg.covariate_names());
    let q = cfg.quota();
    let rankers = cfg.ranker_ids();

    let mut households = Vec::new();
    let mut rankings = Vec::new();
    let mut quotas = BTreeMap::new();
    let mut alpha_map = BTreeMap::new();
    let mut score_map = BTreeMap::new();
    let mut poor = BTreeSet::new();
    let mut communities = Vec::with_capacity(cfg.n_communities);

    for k in 0..cfg.n_communities {
        let cid = format!("c{:03}", k + 1);
        let n = cfg.households_per_community;
        let mut ids = Vec::with_capacity(n);
        let mut welfare = Vec::with_capacity(n);
        let mut seen = Vec::with_capacity(n);
        for i in 0..n {
            let id = format!("{cid}-h{:03}", i + 1);
            let mut x: Vec<f64> = (0..cfg.n_binary)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            x.extend((0..cfg.n_continuous).map(|_| std_normal(rng)));
            let alpha = cfg.alpha_sd * std_normal(rng);
            let xd: f64 = x.iter().zip(&cfg.delta).map(|(a, b)| a * b).sum();
            let mut shift = 0.0;
            if let Some(e) = &cfg.elite {
                let connected = rng.random_bool(e.prevalence);
                shift = if connected { e.effect } else { 0.0 };
                x.push(if connected { 1.0 } else { 0.0 });
            }
            let xg: f64 = x[..p].iter().zip(&gamma).map(|(a, b)| a * b).sum();
            let y = cfg.intercept + xg + cfg.expenditure_sd * std_normal(rng);
            welfare.push(alpha + xd);
            seen.push(alpha + xd + shift);
            alpha_map.insert(id.clone(), alpha);
            score_map.insert(id.clone(), alpha + xd);
            households.push(Household {
                id: id.clone(),
                community_id: cid.clone(),
                x: x.into_iter().map(T::lit).collect(),
                y: Some(T::lit(y)),
            });
            ids.push(id);
        }
        for &i in argsort(&welfare).iter().take(q) {
            poor.insert(ids[i].clone());
        }
        for (r, rid) in rankers.iter().enumerate() {
            let order: Vec<&str> = if cfg.shuffled_rankers.contains(&r) {
                let mut o: Vec<&str> = ids.iter().map(String::as_str).collect();
                o.shuffle(rng);
                o
            } else {
                let sd = 1.0 / cfg.omega[r].sqrt();
                let z: Vec<f64> = seen.iter().map(|s| s + sd * std_normal(rng)).collect();
                argsort(&z).into_iter().map(|i| ids[i].as_str()).collect()
            };
            rankings.push(RankingScheme::from_order(&cid, rid, &order)?);
        }
        quotas.insert(cid.clone(), q);
        communities.push(cid);
    }

    let mut shuffled = communities.clone();
    shuffled.shuffle(rng);
    let mut splits = BTreeMap::new();
    for (i, c) in shuffled.into_iter().enumerate() {
        let label = if i < cfg.n_test_communities {
            TEST
        } else if i < cfg.n_test_communities + cfg.n_aux_communities {
            AUX
        } else {
            TRAIN
        };
        splits.insert(c, label.to_string());
    }

    let dataset = Dataset::new(households, rankings, quotas, schema)?;
    Ok(SyntheticData {
        dataset,
        truth: Truth {
            delta: cfg.delta.clone(),
            omega: cfg.omega.clone(),
            gamma,
            intercept: cfg.intercept,
            elite_effect: cfg.elite.as_ref().map(|e| e.effect),
            alpha: alpha_map,
            score: score_map,
            poor,
        },
        splits,
    })
}

impl<T: Real> SyntheticData<T> {
    /// Writes census, rankings, survey, quotas, truth, parameters and splits
    /// files into `dir`; returns the paths written.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ds = &self.dataset;
        let path = |f: &str| dir.join(f);
        write_census(path("census.csv"), &ds.households, &ds.schema)?;
        write_rankings(path("rankings.csv"), &ds.rankings)?;
        write_survey(path("survey.csv"), &ds.households, &ds.schema)?;
        write_quotas(path("quotas.csv"), &ds.quotas)?;
        write_table(
            path("truth.csv"),
            &["household_id", "community_id", "alpha", "true_score", "poor"],
            ds.households.iter().map(|h| {
                vec![
                    h.id.clone(),
                    h.community_id.clone(),
                    self.truth.alpha[&h.id].to_string(),
                    self.truth.score[&h.id].to_string(),
                    u8::from(self.truth.poor.contains(&h.id)).to_string(),
                ]
            }),
        )?;
        let mut params = Vec::new();
        for (name, (d, g)) in ds.schema.names.iter().zip(self.truth.delta.iter().zip(&self.truth.gamma)) {
            params.push(vec![format!("delta:{name}"), d.to_string()]);
            params.push(vec![format!("gamma:{name}"), g.to_string()]);
        }
        params.push(vec!["intercept".into(), self.truth.intercept.to_string()]);
        for (r, w) in self.truth.omega.iter().enumerate() {
            params.push(vec![format!("omega:r{}", r + 1), w.to_string()]);
        }
        if let Some(e) = self.truth.elite_effect {
            params.push(vec!["elite_effect".into(), e.to_string()]);
        }
        write_table(path("truth_params.csv"), &["parameter", "value"], params)?;
        write_splits(path("splits.csv"), &self.splits)?;
        Ok(["census.csv", "rankings.csv", "survey.csv", "quotas.csv", "truth.csv", "truth_params.csv", "splits.csv"]
            .iter()
            .map(|f| path(f))
            .collect())
    }
}

/// Reads the `poor` column of a `truth.csv`.
pub fn load_truth_poor(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let (header, rows) = crate::data::io::read_table(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (id, poor) = (col("household_id")?, col("poor")?);
    Ok(rows
        .into_iter()
        .filter(|r| r[poor].trim() == "1")
        .map(|r| r[id].clone())
        .collect())
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{dichotomize, fit_pmt_ols, fit_probit_mle};
use crate::data::{Dataset, Household};
use crate::dist::{derive_seed, RngStream};
use crate::error::{Error, Result};
use crate::gibbs::{run_gibbs, McmcConfig, ModelSpec};
use crate::linalg::{dot, Matrix};
use crate::real::Real;
use crate::synth::{AUX, TEST, TRAIN};
use crate::update::{compose_updated_priors, DEFAULT_INFLATION, DEFAULT_SHRINK};

use super::metrics::{mean_sd, pooled_error_rate};
use super::scoring::{score_households, select_by_community};

/// A way of producing targeting scores from training communities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Ranking model fitted on training rankings.
    Hybrid,
    /// As `Hybrid`, scoring with the elite-connection weights set to zero.
    HybridEc,
    /// As `Hybrid`, jointly with survey expenditure from the auxiliary split.
    HybridAi,
    /// As `Hybrid`, with priors carried over from a fit on the auxiliary split's rankings.
    HybridDu,
    /// Probit on the dichotomized training rankings.
    Probit,
    /// Least squares of training expenditure on covariates.
    Pmt,
    /// Uniform random scores.
    Random,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Hybrid,
        Method::HybridEc,
        Method::HybridAi,
        Method::HybridDu,
        Method::Probit,
        Method::Pmt,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hybrid => "hybrid",
            Method::HybridEc => "hybrid-ec",
            Method::HybridAi => "hybrid-ai",
            Method::HybridDu => "hybrid-du",
            Method::Probit => "probit",
            Method::Pmt => "pmt",
            Method::Random => "random",
        }
    }

    fn tag(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Replication experiment settings.
#[derive(Clone, Debug)]
pub struct ExperimentPlan<T = f64> {
    /// Numbers of training communities to sample.
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Model used by the hybrid methods.
    pub spec: ModelSpec<T>,
    pub mcmc: McmcConfig,
    pub du_inflation: f64,
    pub du_shrink: f64,
    pub train_label: String,
    pub test_label: String,
    pub aux_label: String,
}

impl<T: Real> Default for ExperimentPlan<T> {
    fn default() -> Self {
        Self {
            sizes: vec![5, 15, 30],
            replications: 30,
            seed: 0,
            methods: vec![Method::Hybrid, Method::Probit, Method::Pmt, Method::Random],
            spec: ModelSpec::basic(),
            mcmc: McmcConfig::default(),
            du_inflation: DEFAULT_INFLATION,
            du_shrink: DEFAULT_SHRINK,
            train_label: TRAIN.into(),
            test_label: TEST.into(),
            aux_label: AUX.into(),
        }
    }
}

impl<T: Real> ExperimentPlan<T> {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be positive".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::InvalidConfig("community sample sizes must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        self.mcmc.validate()?;
        self.spec.validate()
    }
}

/// Data for an experiment: everything, the split of each community, and
/// the truly poor households per community.
#[derive(Clone, Debug)]
pub struct ExperimentData<T = f64> {
    pub data: Dataset<T>,
    pub splits: BTreeMap<String, String>,
    pub truly_poor: BTreeMap<String, BTreeSet<String>>,
}

impl<T: Real> ExperimentData<T> {
    /// Truth from a set of poor household ids.
    pub fn with_poor_set(data: Dataset<T>, splits: BTreeMap<String, String>, poor: &BTreeSet<String>) -> Self {
        let mut truly_poor: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for h in &data.households {
            if poor.contains(&h.id) {
                truly_poor.entry(h.community_id.clone()).or_default().insert(h.id.clone());
            }
        }
        Self {
            data,
            splits,
            truly_poor,
        }
    }

    /// Truth from the community rankings: the quota-many households with
    /// the lowest mean rank across rankers (ties by household id).
    pub fn with_consensus_truth(data: Dataset<T>, splits: BTreeMap<String, String>) -> Result<Self> {
        let mut mean_rank: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        for s in &data.rankings {
            let m = mean_rank.entry(s.community_id.as_str()).or_default();
            for (h, &r) in s.ranks() {
                *m.entry(h.as_str()).or_default() += r as f64;
            }
        }
        let mut truly_poor = BTreeMap::new();
        for (c, ranks) in mean_rank {
            let q = *data
                .quotas
                .get(c)
                .ok_or_else(|| Error::InvalidConfig(format!("no quota for community `{c}`")))?;
            let mut v: Vec<(&str, f64)> = ranks.into_iter().collect();
            v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
            truly_poor.insert(c.to_string(), v.into_iter().take(q).map(|(h, _)| h.to_string()).collect());
        }
        Ok(Self {
            data,
            splits,
            truly_poor,
        })
    }

    fn communities(&self, label: &str) -> Vec<String> {
        self.splits
            .iter()
            .filter(|(_, l)| l.as_str() == label)
            .map(|(c, _)| c.clone())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationError {
    pub method: Method,
    pub n_communities: usize,
    pub replication: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n_communities: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    /// Sorted by method, size, replication.
    pub errors: Vec<ReplicationError>,
    /// Sorted by method, size.
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn mean_error(&self, method: Method, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.n_communities == n)
            .map(|r| r.mean)
    }
}

struct Prepared<T: Real> {
    train: Vec<String>,
    test: Dataset<T>,
    test_quotas: BTreeMap<String, usize>,
    aux_survey: Vec<Household<T>>,
    du_spec: Option<ModelSpec<T>>,
}

/// Runs every (method, size, replication) cell. Each replication samples
/// its training communities once and shares them across methods, and all
/// randomness derives from `plan.seed`, so the result does not depend on
/// the number of worker threads.
pub fn replication_experiment<T: Real>(
    plan: &ExperimentPlan<T>,
    input: &ExperimentData<T>,
    threads: Option<usize>,
) -> Result<ExperimentResult> {
    plan.validate()?;
    let train = input.communities(&plan.train_label);
    let test = input.communities(&plan.test_label);
    if test.is_empty() {
        return Err(Error::InvalidConfig(format!("no `{}` communities", plan.test_label)));
    }
    for &n in &plan.sizes {
        if n > train.len() {
            return Err(Error::NotEnoughCommunities {
                requested: n,
                available: train.len(),
            });
        }
    }
    let test_set: BTreeSet<String> = test.iter().cloned().collect();
    let test_data = input.data.subset(&test_set)?;
    let test_quotas: BTreeMap<String, usize> = test
        .iter()
        .map(|c| (c.clone(), input.truly_poor.get(c).map_or(0, BTreeSet::len)))
        .filter(|(_, q)| *q > 0)
        .collect();

    let aux: BTreeSet<String> = input.communities(&plan.aux_label).into_iter().collect();
    let needs_aux = plan.methods.iter().any(|m| matches!(m, Method::HybridAi | Method::HybridDu));
    if needs_aux && aux.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "methods hybrid-ai and hybrid-du need `{}` communities",
            plan.aux_label
        )));
    }
    let aux_data = if aux.is_empty() { None } else { Some(input.data.subset(&aux)?) };
    let aux_survey: Vec<Household<T>> = aux_data
        .as_ref()
        .map(|d| d.surveyed().cloned().collect())
        .unwrap_or_default();
    if plan.methods.contains(&Method::HybridAi) && aux_survey.is_empty() {
        return Err(Error::InvalidConfig("auxiliary communities carry no expenditure".into()));
    }
    let du_spec = if plan.methods.contains(&Method::HybridDu) {
        let aux_data = aux_data.as_ref().expect("checked above").clone().without_expenditure();
        let mut rng = RngStream::new(derive_seed(plan.seed, u64::MAX), 0);
        let prior_fit = run_gibbs(&plan.spec, &aux_data, &plan.mcmc, &mut rng)?;
        let up = compose_updated_priors(&prior_fit, plan.du_inflation, plan.du_shrink)?;
        Some(up.apply(&plan.spec, &input.data.schema.names)?)
    } else {
        None
    };

    let prep = Prepared {
        train,
        test: test_data,
        test_quotas,
        aux_survey,
        du_spec,
    };

    let cells: Vec<(usize, usize)> = plan
        .sizes
        .iter()
        .flat_map(|&n| (0..plan.replications).map(move |r| (n, r)))
        .collect();
    let run = || -> Result<Vec<Vec<ReplicationError>>> {
        cells
            .par_iter()
            .map(|&(n, r)| run_cell(plan, input, &prep, n, r))
            .collect()
    };
    let nested = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut errors: Vec<ReplicationError> = nested.into_iter().flatten().collect();
    errors.sort_by(|a, b| {
        (a.method, a.n_communities, a.replication).cmp(&(b.method, b.n_communities, b.replication))
    });

    let mut summary = Vec::new();
    for &m in &plan.methods {
        for &n in &plan.sizes {
            let v: Vec<f64> = errors
                .iter()
                .filter(|e| e.method == m && e.n_communities == n)
                .map(|e| e.error)
                .collect();
            let (mean, sd) = mean_sd(&v);
            summary.push(SummaryRow {
                method: m,
                n_communities: n,
                mean,
                sd,
            });
        }
    }
    summary.sort_by_key(|r| (r.method, r.n_communities));
    Ok(ExperimentResult { errors, summary })
}

fn run_cell<T: Real>(
    plan: &ExperimentPlan<T>,
    input: &ExperimentData<T>,
    prep: &Prepared<T>,
    n: usize,
    rep: usize,
) -> Result<Vec<ReplicationError>> {
    let cell_seed = derive_seed(plan.seed, n as u64);
    let mut rng = RngStream::new(cell_seed, rep as u64);
    let sample: BTreeSet<String> = prep.train.choose_multiple(&mut rng, n).cloned().collect();
    let train = input.data.subset(&sample)?;

    let mut out = Vec::with_capacity(plan.methods.len());
    for &m in &plan.methods {
        let mut mrng = RngStream::new(derive_seed(cell_seed, m.tag()), rep as u64);
        let scores = method_scores(m, plan, prep, &train, &mut mrng)
            .map_err(|e| Error::Replication {
                method: m.name(),
                n_communities: n,
                replication: rep,
                source: Box::new(e),
            })?;
        let selected = select_by_community(&prep.test, &scores, &prep.test_quotas)?;
        out.push(ReplicationError {
            method: m,
            n_communities: n,
            replication: rep,
            error: pooled_error_rate(&selected, &input.truly_poor_subset(&prep.test_quotas)),
        });
    }
    Ok(out)
}

impl<T: Real> ExperimentData<T> {
    fn truly_poor_subset(&self, keys: &BTreeMap<String, usize>) -> BTreeMap<String, BTreeSet<String>> {
        keys.keys()
            .filter_map(|c| self.truly_poor.get(c).map(|s| (c.clone(), s.clone())))
            .collect()
    }
}

fn method_scores<T: Real>(
    method: Method,
    plan: &ExperimentPlan<T>,
    prep: &Prepared<T>,
    train: &Dataset<T>,
    rng: &mut RngStream,
) -> Result<BTreeMap<String, T>> {
    let no_elite: &[usize] = &[];
    match method {
        Method::Hybrid | Method::HybridEc => {
            let fit = run_gibbs(&plan.spec, &train.clone().without_expenditure(), &plan.mcmc, rng)?;
            let elite = if method == Method::HybridEc {
                train.schema.elite_cols.as_slice()
            } else {
                no_elite
            };
            score_households(&prep.test, &fit.delta_mean(), elite)
        }
        Method::HybridAi => {
            let data = with_survey(train, &prep.aux_survey)?;
            let spec = plan.spec.clone().with_auxiliary();
            let fit = run_gibbs(&spec, &data, &plan.mcmc, rng)?;
            score_households(&prep.test, &fit.delta_mean(), no_elite)
        }
        Method::HybridDu => {
            let spec = prep.du_spec.as_ref().expect("prepared when requested");
            let fit = run_gibbs(spec, &train.clone().without_expenditure(), &plan.mcmc, rng)?;
            score_households(&prep.test, &fit.delta_mean(), no_elite)
        }
        Method::Probit => {
            let (x, d) = stacked_dichotomized(train)?;
            let fit = fit_probit_mle(&x, &d)?;
            // the probit index rises with selection; negate so lowest is neediest
            Ok(prep
                .test
                .households
                .iter()
                .map(|h| (h.id.clone(), -(dot(&h.x, fit.slopes()) + fit.intercept())))
                .collect())
        }
        Method::Pmt => {
            let surveyed: Vec<&Household<T>> = train.surveyed().collect();
            let p = train.n_covariates();
            let x = Matrix::from_vec(
                surveyed.len(),
                p,
                surveyed.iter().flat_map(|h| h.x.iter().copied()).collect(),
            )?;
            let y: Vec<T> = surveyed.iter().map(|h| h.y.expect("surveyed")).collect();
            let fit = fit_pmt_ols(&x, &y)?;
            Ok(prep
                .test
                .households
                .iter()
                .map(|h| (h.id.clone(), fit.predict(&h.x)))
                .collect())
        }
        Method::Random => Ok(prep
            .test
            .households
            .iter()
            .map(|h| (h.id.clone(), T::lit(rng.random::<f64>())))
            .collect()),
    }
}

/// Training households without expenditure plus survey households (with
/// expenditure, without rankings).
fn with_survey<T: Real>(train: &Dataset<T>, survey: &[Household<T>]) -> Result<Dataset<T>> {
    let mut households: Vec<Household<T>> = train.clone().without_expenditure().households;
    households.extend(survey.iter().cloned());
    Dataset::new(households, train.rankings.clone(), train.quotas.clone(), train.schema.clone())
}

/// One row per (ranker, household): covariates and whether the ranker put
/// the household inside the community quota.
pub fn stacked_dichotomized<T: Real>(train: &Dataset<T>) -> Result<(Matrix<T>, Vec<u8>)> {
    let p = train.n_covariates();
    let mut xs = Vec::new();
    let mut d = Vec::new();
    for s in &train.rankings {
        let q = *train
            .quotas
            .get(&s.community_id)
            .ok_or_else(|| Error::InvalidConfig(format!("no quota for community `{}`", s.community_id)))?;
        for (h, v) in dichotomize(s, q)? {
            let hh = train.household(&h).ok_or_else(|| Error::UnknownHousehold(h.clone()))?;
            xs.extend_from_slice(&hh.x);
            d.push(v);
        }
    }
    Ok((Matrix::from_vec(d.len(), p, xs)?, d))
}

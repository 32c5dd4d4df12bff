use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use hytarget::baselines::{fit_pmt_ols, fit_probit_mle};
use hytarget::config::Config;
use hytarget::data::io::{load_census, load_dataset, load_quotas, load_splits, read_table, write_atomic, write_table};
use hytarget::data::{ColumnKind, ColumnScale, ScalingInfo};
use hytarget::dist::RngStream;
use hytarget::eval::{
    aggregate_model_ranking, compute_scores, rank_correlation, replication_experiment, select_by_community,
    stacked_dichotomized, standardized_coefficients,
};
use hytarget::gibbs::{run_gibbs, CoefficientSummary, INTERCEPT};
use hytarget::linalg::Matrix;
use hytarget::synth::{self, load_truth_poor};
use hytarget::update::compose_updated_priors;
use hytarget::{Dataset, ExperimentData, PosteriorSamples};

use crate::manifest::RunManifest;
use crate::{EvaluateArgs, Failure, FitArgs, FitMethod, ScoreArgs, Shared, UpdateArgs};

type Outcome = Result<(), Failure>;

const COEF_HEADER: [&str; 6] = ["method", "name", "posterior_mean", "posterior_sd", "q2.5", "q97.5"];

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// The path given for `flag`, which must exist.
fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    let p = p.as_deref().ok_or_else(|| usage(format!("{flag} is required")))?;
    if !p.exists() {
        return Err(usage(format!("{flag}: no such file `{}`", p.display())));
    }
    Ok(p)
}

fn optional<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<Option<&'a Path>, Failure> {
    match p {
        Some(_) => require(p, flag).map(Some),
        None => Ok(None),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) if !p.exists() => Err(usage(format!("--config: no such file `{}`", p.display()))),
        Some(p) => Config::load(p).map_err(|e| usage(e.to_string())),
        None => Ok(Config::default()),
    }
}

fn out_dir(shared: &Shared) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&shared.out).map_err(|e| hytarget::Error::Io {
        path: shared.out.display().to_string(),
        source: e,
    })?;
    Ok(&shared.out)
}

fn coef_row(method: &str, c: &CoefficientSummary) -> Vec<String> {
    vec![
        method.into(),
        c.name.clone(),
        c.mean.to_string(),
        c.sd.to_string(),
        c.q025.to_string(),
        c.q975.to_string(),
    ]
}

fn point_row(method: &str, name: &str, value: f64) -> Vec<String> {
    vec![method.into(), name.into(), value.to_string(), String::new(), String::new(), String::new()]
}

pub fn generate(shared: &Shared) -> Outcome {
    let cfg = load_config(shared.config.as_deref())?;
    let mut gen = cfg.generate.unwrap_or_default();
    gen.seed = shared.seed;
    gen.validate().map_err(|e| usage(e.to_string()))?;
    let dir = out_dir(shared)?;
    let mut manifest = RunManifest::start("generate", shared.config.as_deref(), dir, shared.seed);
    let data = synth::generate::<f64>(&gen)?;
    for p in data.write(dir)? {
        manifest.artifact(&p)?;
    }
    log::info!(
        "wrote {} households in {} communities to {}",
        data.dataset.households.len(),
        gen.n_communities,
        dir.display()
    );
    manifest.finish(dir)?;
    Ok(())
}

pub fn fit(shared: &Shared, a: &FitArgs) -> Outcome {
    let census = require(&a.census, "--census")?;
    let rankings = require(&a.rankings, "--rankings")?;
    let quotas = optional(&a.quotas, "--quotas")?;
    let survey = optional(&a.survey, "--survey")?;
    let cfg = load_config(shared.config.as_deref())?;
    if cfg.model.auxiliary && a.method == FitMethod::Hybrid && survey.is_none() {
        return Err(usage("--survey is required by the auxiliary model"));
    }
    if a.method == FitMethod::Pmt && survey.is_none() {
        return Err(usage("--survey is required by --method pmt"));
    }
    if a.method == FitMethod::Probit && quotas.is_none() {
        return Err(usage("--quotas is required by --method probit"));
    }

    let dir = out_dir(shared)?;
    let mut manifest = RunManifest::start("fit", shared.config.as_deref(), dir, shared.seed);
    for p in [Some(census), Some(rankings), quotas, survey].into_iter().flatten() {
        manifest.input(p)?;
    }
    let mut data: Dataset = load_dataset(census, rankings, quotas, survey)?;
    // validate the configuration before anything is written
    let kinds = cfg.model.column_kinds(&data.schema.names).map_err(|e| usage(e.to_string()))?;
    let hybrid = match a.method {
        FitMethod::Hybrid => {
            let mut spec = cfg.to_spec::<f64>(&data.schema.names).map_err(|e| usage(e.to_string()))?;
            if spec.elite_cols.is_empty() {
                spec.elite_cols = data.schema.elite_cols.clone();
            }
            Some((spec, cfg.mcmc_config(shared.seed).map_err(|e| usage(e.to_string()))?))
        }
        _ => None,
    };
    if !a.raw {
        data = data.standardized_with(&kinds)?;
        let path = dir.join("scaling.csv");
        write_scaling(&path, &data.schema.names, &data.scaling)?;
        manifest.artifact(&path)?;
    }
    let names = data.schema.names.clone();
    let coef_path = dir.join("coefficients.csv");

    match a.method {
        FitMethod::Hybrid => {
            let (spec, mcmc) = hybrid.expect("built above");
            log::info!("prior source: {}", spec.prior_source);
            manifest.prior_source = Some(spec.prior_source.clone());
            let mut rng = RngStream::new(shared.seed, 0);
            let samples = run_gibbs(&spec, &data, &mcmc, &mut rng)?;

            let rows = samples.delta_summary().iter().map(|c| coef_row("hybrid", c)).collect::<Vec<_>>();
            write_table(&coef_path, &COEF_HEADER, rows)?;
            manifest.artifact(&coef_path)?;
            if let Some(g) = samples.gamma_summary() {
                let path = dir.join("expenditure_coefficients.csv");
                write_table(&path, &COEF_HEADER, g.iter().map(|c| coef_row("expenditure", c)))?;
                manifest.artifact(&path)?;
            }
            write_standardized(dir, &names, &samples.delta_mean(), &mut manifest)?;
            if let Some(omega) = samples.omega_mean() {
                let path = dir.join("rankers.csv");
                let rows = samples.ranker_ids.iter().enumerate().map(|(r, id)| {
                    let f = samples.omega_frequencies(r).expect("omega sampled");
                    vec![id.clone(), omega[r].to_string(), f[0].to_string(), f[1].to_string(), f[2].to_string()]
                });
                write_table(&path, &["ranker_id", "omega_mean", "p_low", "p_mid", "p_high"], rows)?;
                manifest.artifact(&path)?;
                let path = dir.join("correlations.csv");
                write_correlations(&path, &samples, &data)?;
                manifest.artifact(&path)?;
            }
            if a.samples {
                let path = dir.join("samples.csv");
                samples.write_csv(&path)?;
                manifest.artifact(&path)?;
            }
        }
        FitMethod::Probit => {
            let (x, d) = stacked_dichotomized(&data)?;
            let fit = fit_probit_mle(&x, &d)?;
            if !fit.converged {
                log::warn!("probit did not converge after {} iterations", fit.iterations);
            }
            let mut rows: Vec<_> = names.iter().zip(fit.slopes()).map(|(n, &b)| point_row("probit", n, b)).collect();
            rows.push(point_row("probit", INTERCEPT, fit.intercept()));
            write_table(&coef_path, &COEF_HEADER, rows)?;
            manifest.artifact(&coef_path)?;
            write_standardized(dir, &names, fit.slopes(), &mut manifest)?;
        }
        FitMethod::Pmt => {
            let surveyed: Vec<_> = data.surveyed().collect();
            let x = Matrix::from_vec(
                surveyed.len(),
                names.len(),
                surveyed.iter().flat_map(|h| h.x.iter().copied()).collect(),
            )?;
            let y: Vec<f64> = surveyed.iter().map(|h| h.y.expect("surveyed")).collect();
            let fit = fit_pmt_ols(&x, &y)?;
            let mut rows: Vec<_> = names.iter().zip(fit.slopes()).map(|(n, &b)| point_row("pmt", n, b)).collect();
            rows.push(point_row("pmt", INTERCEPT, *fit.coefficients.last().expect("intercept")));
            write_table(&coef_path, &COEF_HEADER, rows)?;
            manifest.artifact(&coef_path)?;
            write_standardized(dir, &names, fit.slopes(), &mut manifest)?;
        }
    }
    manifest.finish(dir)?;
    Ok(())
}

fn write_scaling(path: &Path, names: &[String], info: &ScalingInfo<f64>) -> Result<(), hytarget::Error> {
    let rows = names.iter().zip(&info.columns).map(|(n, c)| {
        let kind = match c.kind {
            ColumnKind::Binary => "binary",
            ColumnKind::Continuous => "continuous",
        };
        vec![n.clone(), kind.to_string(), c.divisor.to_string()]
    });
    write_table(path, &["name", "kind", "divisor"], rows)
}

fn read_scaling(path: &Path, names: &[String]) -> Result<ScalingInfo<f64>, Failure> {
    let (header, rows) = read_table(path)?;
    if header != ["name", "kind", "divisor"] {
        return Err(usage(format!("--scaling: `{}` is not a scaling file", path.display())));
    }
    let by_name: BTreeMap<&str, &Vec<String>> = rows.iter().map(|r| (r[0].as_str(), r)).collect();
    let mut columns = Vec::with_capacity(names.len());
    for n in names {
        let r = by_name
            .get(n.as_str())
            .ok_or_else(|| usage(format!("--scaling: no entry for covariate `{n}`")))?;
        let divisor: f64 = r[2]
            .parse()
            .ok()
            .filter(|d: &f64| *d > 0.0)
            .ok_or_else(|| usage(format!("--scaling: bad divisor for `{n}`")))?;
        let kind = if r[1] == "binary" { ColumnKind::Binary } else { ColumnKind::Continuous };
        columns.push(ColumnScale { kind, divisor });
    }
    Ok(ScalingInfo { columns })
}

fn write_standardized(dir: &Path, names: &[String], coefs: &[f64], manifest: &mut RunManifest) -> Outcome {
    match standardized_coefficients(coefs) {
        Ok(s) => {
            let path = dir.join("standardized_coefs.csv");
            let rows = names
                .iter()
                .zip(coefs.iter().zip(&s))
                .map(|(n, (c, v))| vec![n.clone(), c.to_string(), v.to_string()]);
            write_table(&path, &["name", "coefficient", "standardized"], rows)?;
            manifest.artifact(&path)?;
        }
        Err(e) => log::warn!("standardized coefficients skipped: {e}"),
    }
    Ok(())
}

/// Spearman correlation of the model's aggregate ranking with each ranker's
/// ranking, per community.
fn write_correlations(path: &Path, samples: &PosteriorSamples, data: &Dataset) -> Result<(), hytarget::Error> {
    let mut rows = Vec::new();
    for c in data.ranked_communities() {
        let model = aggregate_model_ranking(samples, data, &c)?;
        for s in data.rankings.iter().filter(|s| s.community_id == c) {
            let rho = rank_correlation(model.ranks(), s.ranks())?;
            rows.push(vec![c.clone(), s.ranker_id.clone(), rho.to_string()]);
        }
    }
    write_table(path, &["community_id", "ranker_id", "spearman"], rows)
}

pub fn score(shared: &Shared, a: &ScoreArgs) -> Outcome {
    let census = require(&a.census, "--census")?;
    let coef_path = require(&a.coefficients, "--coefficients")?;
    let quotas = optional(&a.quotas, "--quotas")?;
    let beside = coef_path.with_file_name("scaling.csv");
    let scaling = match optional(&a.scaling, "--scaling")? {
        Some(p) => Some(p),
        None if beside.exists() => {
            log::info!("using {}", beside.display());
            Some(beside.as_path())
        }
        None => None,
    };
    let cfg = load_config(shared.config.as_deref())?;

    let dir = out_dir(shared)?;
    let mut manifest = RunManifest::start("score", shared.config.as_deref(), dir, shared.seed);
    for p in [Some(census), Some(coef_path), quotas, scaling].into_iter().flatten() {
        manifest.input(p)?;
    }
    let (households, schema) = load_census::<f64>(census)?;
    let mut data = Dataset::new(households, Vec::new(), BTreeMap::new(), schema)?;
    if let Some(p) = scaling {
        data = data.with_scaling(read_scaling(p, &data.schema.names)?)?;
    }
    let (header, rows) = read_table(coef_path)?;
    let col = |n: &str| {
        header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| usage(format!("--coefficients: missing column `{n}`")))
    };
    let (mcol, ncol, vcol) = (col("method")?, col("name")?, col("posterior_mean")?);
    let mut coefs: BTreeMap<&str, f64> = BTreeMap::new();
    let mut method = String::new();
    for r in &rows {
        let v: f64 = r[vcol]
            .parse()
            .map_err(|_| usage(format!("--coefficients: `{}` is not a number", r[vcol])))?;
        coefs.insert(r[ncol].as_str(), v);
        method = r[mcol].clone();
    }
    let delta = data
        .schema
        .names
        .iter()
        .map(|n| {
            coefs
                .get(n.as_str())
                .copied()
                .ok_or_else(|| usage(format!("--coefficients: no coefficient for covariate `{n}`")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let intercept = coefs.get(INTERCEPT).copied().unwrap_or(0.0);

    let elite: Vec<usize> = if a.drop_elite {
        let spec = cfg.to_spec::<f64>(&data.schema.names).map_err(|e| usage(e.to_string()))?;
        let cols = if spec.elite_cols.is_empty() { data.schema.elite_cols.clone() } else { spec.elite_cols };
        if cols.is_empty() {
            log::warn!("--drop-elite: no elite-connection covariates found");
        }
        cols
    } else {
        Vec::new()
    };
    // the probit index rises with selection; negate so lowest is neediest
    let sign = if method == "probit" { -1.0 } else { 1.0 };
    let raw = compute_scores(&data.covariate_matrix(), &delta, &elite)?;
    let scores: BTreeMap<String, f64> = data
        .households
        .iter()
        .zip(raw)
        .map(|(h, s)| (h.id.clone(), sign * (s + intercept)))
        .collect();

    let selected: BTreeSet<String> = match quotas {
        Some(q) => select_by_community(&data, &scores, &load_quotas(q)?)?
            .into_values()
            .flatten()
            .collect(),
        None => BTreeSet::new(),
    };
    let path = dir.join("scores.csv");
    let rows = data.households.iter().map(|h| {
        let sel = match quotas {
            Some(_) => u8::from(selected.contains(&h.id)).to_string(),
            None => String::new(),
        };
        vec![h.id.clone(), h.community_id.clone(), scores[&h.id].to_string(), sel]
    });
    write_table(&path, &["household_id", "community_id", "score", "selected"], rows)?;
    manifest.artifact(&path)?;
    manifest.finish(dir)?;
    Ok(())
}

pub fn evaluate(shared: &Shared, a: &EvaluateArgs) -> Outcome {
    let data_dir = require(&a.data, "--data")?;
    let plan_path = a.plan.as_deref().or(shared.config.as_deref());
    let cfg = load_config(plan_path)?;
    let plan_section = cfg.plan.clone().unwrap_or_default();
    if plan_section.replications == 0 {
        return Err(usage("plan: replications must be positive"));
    }
    if a.threads == Some(0) {
        return Err(usage("--threads must be positive"));
    }
    let file = |name: &str| data_dir.join(name);
    for f in ["census.csv", "rankings.csv", "quotas.csv", "splits.csv"] {
        if !file(f).exists() {
            return Err(usage(format!("--data: `{}` has no {f}", data_dir.display())));
        }
    }
    let survey = Some(file("survey.csv")).filter(|p| p.exists());
    let truth = Some(file("truth.csv")).filter(|p| p.exists());

    let dir = out_dir(shared)?;
    let mut manifest = RunManifest::start("evaluate", plan_path, dir, shared.seed);
    for p in ["census.csv", "rankings.csv", "quotas.csv", "splits.csv"].map(file).iter().chain(&survey).chain(&truth) {
        manifest.input(p)?;
    }
    let mut data: Dataset = load_dataset(file("census.csv"), file("rankings.csv"), Some(&file("quotas.csv")), survey.as_deref())?;
    if !a.raw {
        let kinds = cfg.model.column_kinds(&data.schema.names).map_err(|e| usage(e.to_string()))?;
        data = data.standardized_with(&kinds)?;
    }
    let plan = cfg
        .experiment_plan::<f64>(&data.schema.names, shared.seed)
        .map_err(|e| usage(e.to_string()))?;
    let splits = load_splits(file("splits.csv"))?;
    let input = match &truth {
        Some(t) => ExperimentData::with_poor_set(data, splits, &load_truth_poor(t)?),
        None => ExperimentData::with_consensus_truth(data, splits)?,
    };
    let result = replication_experiment(&plan, &input, a.threads)?;

    let path = dir.join("errors.csv");
    let rows = result.errors.iter().map(|e| {
        vec![
            e.method.to_string(),
            e.n_communities.to_string(),
            e.replication.to_string(),
            e.error.to_string(),
        ]
    });
    write_table(&path, &["method", "n_communities", "replication", "error"], rows)?;
    manifest.artifact(&path)?;
    let path = dir.join("summary.csv");
    let rows = result
        .summary
        .iter()
        .map(|r| vec![r.method.to_string(), r.n_communities.to_string(), r.mean.to_string(), r.sd.to_string()]);
    write_table(&path, &["method", "n_communities", "mean", "sd"], rows)?;
    manifest.artifact(&path)?;
    for r in &result.summary {
        log::info!("{:<10} n={:<3} mean error {:.3} (sd {:.3})", r.method, r.n_communities, r.mean, r.sd);
    }
    manifest.finish(dir)?;
    Ok(())
}

pub fn update(shared: &Shared, a: &UpdateArgs) -> Outcome {
    let from = require(&a.from, "--from")?;
    if !(a.inflation >= 1.0 && a.inflation.is_finite()) {
        return Err(usage(format!("--inflation must be at least 1, got {}", a.inflation)));
    }
    if !(0.0..=1.0).contains(&a.shrink) {
        return Err(usage(format!("--shrink must lie in [0, 1], got {}", a.shrink)));
    }
    let cfg = load_config(shared.config.as_deref())?;
    // a path ending in .toml is the prior file itself; anything else is a directory
    let (dir, target) = if shared.out.extension().is_some_and(|e| e == "toml") {
        let parent = shared.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        (parent.to_path_buf(), shared.out.clone())
    } else {
        (shared.out.clone(), shared.out.join("prior.toml"))
    };
    std::fs::create_dir_all(&dir).map_err(|e| hytarget::Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut manifest = RunManifest::start("update", shared.config.as_deref(), &dir, shared.seed);
    manifest.input(from)?;
    let samples = PosteriorSamples::read_csv(from, cfg.prior.omega_support)?;
    let up = compose_updated_priors(&samples, a.inflation, a.shrink)?.at_period(a.period);
    let out = cfg.with_updated_prior(&up);
    write_atomic(&target, out.to_toml().as_bytes())?;
    log::info!("wrote {} ({})", target.display(), out.prior.source);
    manifest.artifact(&target)?;
    manifest.finish(&dir)?;
    Ok(())
}

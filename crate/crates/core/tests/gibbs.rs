use hytarget::data::{argsort, CovariateSchema, Dataset, Household, RankingScheme};
use hytarget::dist::RngStream;
use hytarget::gibbs::{run_gibbs, DeltaPrior, GibbsSampler, McmcConfig, ModelSpec};
use hytarget::synth::{generate, GenConfig};
use std::collections::BTreeMap;

fn households(xs: &[(&str, &str, f64)]) -> Vec<Household> {
    xs.iter()
        .map(|(id, c, x)| Household {
            id: id.to_string(),
            community_id: c.to_string(),
            x: vec![*x],
            y: None,
        })
        .collect()
}

#[test]
fn retains_requested_draws() {
    let data = generate::<f64>(&GenConfig::default()).unwrap().dataset;
    let cfg = McmcConfig::new(400, 150, 1);
    let s = run_gibbs(&ModelSpec::multi_ranker(), &data, &cfg, &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(s.len(), 250);
    assert_eq!(s.alpha.as_ref().unwrap().len(), 250);
    assert_eq!(s.omega.as_ref().unwrap().len(), 250);
    assert!(s.gamma.is_none());
}

#[test]
fn same_seed_same_chain() {
    let data = generate::<f64>(&GenConfig::default()).unwrap().dataset;
    let cfg = McmcConfig::new(200, 100, 5);
    let a = run_gibbs(&ModelSpec::multi_ranker(), &data, &cfg, &mut RngStream::new(5, 0)).unwrap();
    let b = run_gibbs(&ModelSpec::multi_ranker(), &data, &cfg, &mut RngStream::new(5, 0)).unwrap();
    assert_eq!(a.delta, b.delta);
}

#[test]
fn sweeps_keep_rankings() {
    for seed in 0..20 {
        let cfg = GenConfig {
            n_communities: 4,
            households_per_community: 2 + seed as usize % 7,
            seed,
            ..GenConfig::default()
        };
        let data = generate::<f64>(&cfg).unwrap().dataset;
        let spec = ModelSpec::multi_ranker().with_auxiliary();
        let mut s = GibbsSampler::new(&spec, &data).unwrap();
        let mut rng = RngStream::new(seed, 1);
        for _ in 0..50 {
            s.step(&mut rng).unwrap();
            assert!(s.design().rank_consistent(s.state()));
        }
    }
}

#[test]
fn two_household_latent_gap() {
    let hh = households(&[("a", "c", 0.0), ("b", "c", 0.0)]);
    let scheme = RankingScheme::from_order("c", "r", &["a", "b"]).unwrap();
    let data = Dataset::new(hh, vec![scheme], BTreeMap::new(), CovariateSchema::from_names(vec!["x".into()])).unwrap();
    let mut s = GibbsSampler::new(&ModelSpec::basic(), &data).unwrap();
    let mut rng = RngStream::new(3, 0);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        s.step(&mut rng).unwrap();
        // a zero column keeps delta out of the latent mean
        let z = &s.state().z[0];
        sum += z[0] - z[1];
    }
    // brute-force oracle: difference of two standard normals conditioned negative
    let mut o = RngStream::new(4, 0);
    let (mut osum, mut on) = (0.0, 0usize);
    while on < n {
        let d = hytarget::dist::std_normal(&mut o) - hytarget::dist::std_normal(&mut o);
        if d < 0.0 {
            osum += d;
            on += 1;
        }
    }
    let (mean, oracle) = (sum / n as f64, osum / n as f64);
    assert!((oracle + 2.0 / std::f64::consts::PI.sqrt()).abs() < 0.02, "{oracle}");
    assert!((mean - oracle).abs() < 0.03, "{mean} vs {oracle}");
}

#[test]
fn quick_recovery_check() {
    let mut covered = 0;
    let runs = 4;
    for seed in 0..runs {
        let gen = generate::<f64>(&GenConfig { seed, ..GenConfig::default() }).unwrap();
        let s = run_gibbs(
            &ModelSpec::multi_ranker(),
            &gen.dataset,
            &McmcConfig::new(2000, 1000, seed),
            &mut RngStream::new(seed, 9),
        )
        .unwrap();
        for (c, d) in s.delta_summary().iter().zip(&gen.truth.delta) {
            if c.q025 <= *d && *d <= c.q975 {
                covered += 1;
            }
        }
    }
    assert!(covered >= runs as usize * 5 * 8 / 10, "covered {covered}");
}

/// Standard error of a chain mean from 50 batch means.
fn batch_se(draws: &[f64]) -> f64 {
    let batches = 50;
    let size = draws.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| draws[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / ((batches - 1) * batches) as f64).sqrt()
}

fn two_covariate_data(sizes: &[usize], scale: f64) -> Dataset {
    let mut rng = RngStream::new(77, 0);
    let mut hh = Vec::new();
    let mut schemes = Vec::new();
    for (c, &n) in sizes.iter().enumerate() {
        let cid = format!("c{c}");
        let ids: Vec<String> = (0..n).map(|i| format!("{cid}-h{i}")).collect();
        for id in &ids {
            hh.push(Household {
                id: id.clone(),
                community_id: cid.clone(),
                x: vec![scale * hytarget::dist::std_normal(&mut rng), scale * hytarget::dist::std_normal(&mut rng)],
                y: None,
            });
        }
        schemes.push(RankingScheme::from_order(&cid, "r", &ids).unwrap());
    }
    Dataset::new(hh, schemes, BTreeMap::new(), CovariateSchema::from_names(vec!["x1".into(), "x2".into()])).unwrap()
}

#[test]
fn successive_conditionals_match_prior_moments() {
    let data = two_covariate_data(&[3, 4, 5], 1.0);
    let mut s = GibbsSampler::new(&ModelSpec::basic(), &data).unwrap();
    let mut rng = RngStream::new(11, 0);
    for _ in 0..1000 {
        s.regenerate_rankings(&mut rng);
        s.step(&mut rng).unwrap();
    }
    let n = 10_000;
    let mut first: [Vec<f64>; 2] = Default::default();
    let mut second: [Vec<f64>; 2] = Default::default();
    for _ in 0..n {
        s.regenerate_rankings(&mut rng);
        s.step(&mut rng).unwrap();
        for j in 0..2 {
            let d = s.state().delta[j];
            first[j].push(d);
            second[j].push(d * d);
        }
    }
    for j in 0..2 {
        let m = first[j].iter().sum::<f64>() / n as f64;
        let z = m / batch_se(&first[j]);
        assert!(z.abs() < 4.0, "delta[{j}] mean {m}, z {z}");
        let m2 = second[j].iter().sum::<f64>() / n as f64;
        let z2 = (m2 - 6.25) / batch_se(&second[j]);
        assert!(z2.abs() < 4.0, "delta[{j}] second moment {m2}, z {z2}");
    }
}

#[test]
fn uninformative_rankings_leave_prior_unchanged() {
    // one household per community: the rankings constrain nothing
    let hh: Vec<Household> = (0..6)
        .map(|i| Household {
            id: format!("h{i}"),
            community_id: format!("c{i}"),
            x: vec![0.05 * (i as f64 - 2.5)],
            y: None,
        })
        .collect();
    let schemes = (0..6)
        .map(|i| RankingScheme::from_order(&format!("c{i}"), "r", &[format!("h{i}")]).unwrap())
        .collect();
    let data = Dataset::new(hh, schemes, BTreeMap::new(), CovariateSchema::from_names(vec!["x".into()])).unwrap();
    let mut s = GibbsSampler::new(&ModelSpec::basic(), &data).unwrap();
    let mut rng = RngStream::new(12, 0);
    for _ in 0..500 {
        s.step(&mut rng).unwrap();
    }
    let mut draws = Vec::new();
    for it in 0..40_000 {
        s.step(&mut rng).unwrap();
        if it % 20 == 0 {
            draws.push(s.state().delta[0]);
        }
    }
    draws.sort_by(f64::total_cmp);
    let prior = statrs::distribution::Normal::new(0.0, 2.5).unwrap();
    let n = draws.len() as f64;
    let d = draws
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = statrs::distribution::ContinuousCDF::cdf(&prior, v);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    let critical = (-(0.005f64).ln() / 2.0).sqrt() / n.sqrt();
    assert!(d < critical, "KS statistic {d} vs {critical}");
}

#[test]
fn rescaled_covariates_rescale_weights() {
    let c = 4.0;
    let base = two_covariate_data(&[5, 6, 7, 8], 1.0);
    let scaled = two_covariate_data(&[5, 6, 7, 8], c);
    let spec = ModelSpec::basic();
    let spec_scaled = ModelSpec {
        delta_prior: DeltaPrior::Isotropic {
            mean: 0.0,
            variance: 6.25 / (c * c),
        },
        ..ModelSpec::basic()
    };
    let cfg = McmcConfig::new(300, 100, 0);
    let a = run_gibbs(&spec, &base, &cfg, &mut RngStream::new(13, 0)).unwrap().delta_mean();
    let b = run_gibbs(&spec_scaled, &scaled, &cfg, &mut RngStream::new(13, 0)).unwrap().delta_mean();
    for (x, y) in a.iter().zip(&b) {
        assert!((x / c - y).abs() < 1e-9 * x.abs().max(1.0), "{x} / {c} vs {y}");
    }
    let score = |d: &[f64], data: &Dataset| -> Vec<f64> {
        data.households.iter().map(|h| h.x.iter().zip(d).map(|(x, w)| x * w).sum()).collect()
    };
    assert_eq!(argsort(&score(&a, &base)), argsort(&score(&b, &scaled)));
}
